#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace vsls {

enum class RelationType { spatial, attribute, time, causal };

std::string_view to_string(RelationType type);

// Accepts exactly the four type names (case-insensitive). Anything else throws
// UnknownRelationType.
RelationType parse_relation_type(std::string_view token);

struct RelationTriplet {
  std::string subject;
  RelationType type = RelationType::spatial;
  std::string object;

  bool operator==(const RelationTriplet&) const = default;
};

enum class ObjectKind { key, cue };

struct WeightedObject {
  std::string label;
  double weight = 1.0;
  ObjectKind kind = ObjectKind::key;

  bool operator==(const WeightedObject&) const = default;
};

inline constexpr double kDefaultKeyWeight = 1.0;
inline constexpr double kDefaultCueWeight = 0.5;

struct QuerySpec {
  std::string question;
  std::vector<WeightedObject> objects;
  std::vector<RelationTriplet> relations;

  bool operator==(const QuerySpec&) const = default;

  // Looks up an object by normalized label.
  const WeightedObject* find(std::string_view label) const;
  std::vector<std::string> key_labels() const;
  // Every object label, in declaration order. This is the detector vocabulary.
  std::vector<std::string> vocabulary() const;
};

// Trimmed, ASCII-lowercased. Query and detector labels match when their
// normalized forms are equal.
std::string normalize_label(std::string_view label);

// Parses the three-line grounding format:
//   Key Objects: person, dog
//   Cue Objects: leash
//   Rel: (person; spatial; dog)
// An optional "Question:" line fills QuerySpec::question. Other lines are ignored.
QuerySpec parse_grounding_text(std::string_view text);

std::string to_grounding_text(const QuerySpec& query);

struct ValidatedQuery {
  QuerySpec query;
  std::vector<std::string> warnings;
};

// Merges duplicate labels (max weight, key wins over cue), appends undeclared
// relation endpoints as cue objects and checks weights and key-object presence.
ValidatedQuery validate_query(QuerySpec query);

nlohmann::json query_to_json(const QuerySpec& query);
QuerySpec query_from_json(const nlohmann::json& doc);

// Reads either a query JSON document or grounding text; the format is chosen
// by the first non-blank character. The result is not validated.
QuerySpec load_query_file(const std::filesystem::path& path);

}  // namespace vsls
