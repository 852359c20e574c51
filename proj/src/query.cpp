#include "vsls/query.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_map>

#include "vsls/error.hpp"
#include "vsls/io.hpp"

namespace vsls {
namespace {

constexpr std::string_view kKeyPrefix = "Key Objects:";
constexpr std::string_view kCuePrefix = "Cue Objects:";
constexpr std::string_view kRelPrefix = "Rel:";
constexpr std::string_view kQuestionPrefix = "Question:";

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_items(std::string_view s) {
  std::vector<std::string> items;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t comma = s.find(',', start);
    const std::size_t end = comma == std::string_view::npos ? s.size() : comma;
    const std::string_view item = trim(s.substr(start, end - start));
    if (!item.empty()) items.emplace_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return items;
}

struct Section {
  std::string_view body;
  std::size_t line = 0;
  std::size_t column = 0;  // 1-based column of body[0]
};

void check_endpoints(const RelationTriplet& rel, std::size_t line, std::size_t column) {
  if (rel.subject.empty() || rel.object.empty()) {
    throw ParseError(ErrorCode::MalformedTriplet, "relation endpoint is empty", line, column);
  }
  if (rel.type != RelationType::time && normalize_label(rel.subject) == normalize_label(rel.object)) {
    throw ParseError(ErrorCode::MalformedTriplet,
                     "subject and object must differ for a " + std::string(to_string(rel.type)) +
                         " relation: '" + rel.subject + "'",
                     line, column);
  }
}

std::vector<RelationTriplet> parse_relations(const Section& section) {
  std::vector<RelationTriplet> relations;
  const std::string_view s = section.body;
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (is_space(c) || c == ',') {
      ++i;
      continue;
    }
    const std::size_t column = section.column + i;
    if (c != '(') {
      throw ParseError(ErrorCode::MalformedTriplet, "expected '(' to start a triplet", section.line,
                       column);
    }
    const std::size_t close = s.find(')', i + 1);
    if (close == std::string_view::npos) {
      throw ParseError(ErrorCode::MalformedTriplet, "unterminated triplet", section.line, column);
    }
    const std::string_view inner = s.substr(i + 1, close - i - 1);
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
      const std::size_t semi = inner.find(';', start);
      parts.push_back(trim(inner.substr(start, semi == std::string_view::npos ? inner.size() - start
                                                                              : semi - start)));
      if (semi == std::string_view::npos) break;
      start = semi + 1;
    }
    if (parts.size() != 3) {
      throw ParseError(ErrorCode::MalformedTriplet,
                       "triplet needs exactly 3 semicolon-separated parts, got " +
                           std::to_string(parts.size()),
                       section.line, column);
    }
    RelationTriplet rel;
    rel.subject = std::string(parts[0]);
    rel.object = std::string(parts[2]);
    try {
      rel.type = parse_relation_type(parts[1]);
    } catch (const Error& e) {
      throw ParseError(ErrorCode::UnknownRelationType,
                       "unknown relation type '" + std::string(parts[1]) + "'", section.line,
                       column);
    }
    check_endpoints(rel, section.line, column);
    relations.push_back(std::move(rel));
    i = close + 1;
  }
  return relations;
}

}  // namespace

std::string_view to_string(RelationType type) {
  switch (type) {
    case RelationType::spatial: return "spatial";
    case RelationType::attribute: return "attribute";
    case RelationType::time: return "time";
    case RelationType::causal: return "causal";
  }
  return "spatial";
}

RelationType parse_relation_type(std::string_view token) {
  const std::string t = normalize_label(token);
  if (t == "spatial") return RelationType::spatial;
  if (t == "attribute") return RelationType::attribute;
  if (t == "time") return RelationType::time;
  if (t == "causal") return RelationType::causal;
  throw Error(ErrorCode::UnknownRelationType, "unknown relation type '" + std::string(token) + "'");
}

std::string normalize_label(std::string_view label) {
  std::string out(trim(label));
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

const WeightedObject* QuerySpec::find(std::string_view label) const {
  const std::string needle = normalize_label(label);
  for (const auto& obj : objects) {
    if (normalize_label(obj.label) == needle) return &obj;
  }
  return nullptr;
}

std::vector<std::string> QuerySpec::key_labels() const {
  std::vector<std::string> out;
  for (const auto& obj : objects) {
    if (obj.kind == ObjectKind::key) out.push_back(obj.label);
  }
  return out;
}

std::vector<std::string> QuerySpec::vocabulary() const {
  std::vector<std::string> out;
  out.reserve(objects.size());
  for (const auto& obj : objects) out.push_back(obj.label);
  return out;
}

QuerySpec parse_grounding_text(std::string_view text) {
  std::optional<Section> keys, cues, rels, question;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos
                                                                          : nl - pos);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    std::size_t indent = 0;
    while (indent < line.size() && is_space(line[indent])) ++indent;
    const std::string_view rest = line.substr(indent);

    const auto take = [&](std::optional<Section>& slot, std::string_view prefix) {
      if (slot || !rest.starts_with(prefix)) return false;
      slot = Section{rest.substr(prefix.size()), line_no, indent + prefix.size() + 1};
      return true;
    };
    take(keys, kKeyPrefix) || take(cues, kCuePrefix) || take(rels, kRelPrefix) ||
        take(question, kQuestionPrefix);

    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }

  if (!keys) {
    throw ParseError(ErrorCode::MissingSection, "no line starting with \"Key Objects:\"",
                     line_no, 1);
  }

  QuerySpec query;
  if (question) query.question = std::string(trim(question->body));
  for (auto& label : split_items(keys->body)) {
    query.objects.push_back({std::move(label), kDefaultKeyWeight, ObjectKind::key});
  }
  if (cues) {
    for (auto& label : split_items(cues->body)) {
      query.objects.push_back({std::move(label), kDefaultCueWeight, ObjectKind::cue});
    }
  }
  if (rels) query.relations = parse_relations(*rels);
  return query;
}

std::string to_grounding_text(const QuerySpec& query) {
  const auto join_kind = [&](ObjectKind kind) {
    std::string out;
    for (const auto& obj : query.objects) {
      if (obj.kind != kind) continue;
      if (!out.empty()) out += ", ";
      out += obj.label;
    }
    return out;
  };
  std::string text;
  if (!query.question.empty()) text += "Question: " + query.question + "\n";
  text += "Key Objects: " + join_kind(ObjectKind::key) + "\n";
  text += "Cue Objects: " + join_kind(ObjectKind::cue) + "\n";
  text += "Rel: ";
  for (std::size_t i = 0; i < query.relations.size(); ++i) {
    const auto& rel = query.relations[i];
    if (i > 0) text += ", ";
    text += "(" + rel.subject + "; " + std::string(to_string(rel.type)) + "; " + rel.object + ")";
  }
  text += "\n";
  return text;
}

ValidatedQuery validate_query(QuerySpec query) {
  ValidatedQuery out;
  out.query.question = std::move(query.question);

  std::unordered_map<std::string, std::size_t> index;
  for (auto& obj : query.objects) {
    obj.label = std::string(trim(obj.label));
    if (obj.label.empty()) throw Error(ErrorCode::InvalidQuery, "object label is empty");
    if (!std::isfinite(obj.weight) || obj.weight <= 0.0 || obj.weight > 1.0) {
      throw Error(ErrorCode::InvalidQuery,
                  "weight of '" + obj.label + "' must lie in (0, 1], got " +
                      std::to_string(obj.weight));
    }
    const std::string key = normalize_label(obj.label);
    const auto it = index.find(key);
    if (it == index.end()) {
      index.emplace(key, out.query.objects.size());
      out.query.objects.push_back(std::move(obj));
      continue;
    }
    auto& kept = out.query.objects[it->second];
    kept.weight = std::max(kept.weight, obj.weight);
    if (obj.kind == ObjectKind::key) kept.kind = ObjectKind::key;
  }

  for (auto& rel : query.relations) {
    rel.subject = std::string(trim(rel.subject));
    rel.object = std::string(trim(rel.object));
    check_endpoints(rel, 0, 0);
    for (const std::string* endpoint : {&rel.subject, &rel.object}) {
      const std::string key = normalize_label(*endpoint);
      if (index.contains(key)) continue;
      index.emplace(key, out.query.objects.size());
      out.query.objects.push_back({*endpoint, kDefaultCueWeight, ObjectKind::cue});
      out.warnings.push_back("relation endpoint '" + *endpoint +
                             "' is not a declared object; added as cue object with weight 0.5");
    }
    out.query.relations.push_back(std::move(rel));
  }

  if (out.query.key_labels().empty()) {
    throw Error(ErrorCode::NoKeyObjects, "query declares no key objects");
  }
  return out;
}

nlohmann::json query_to_json(const QuerySpec& query) {
  nlohmann::json doc;
  doc["question"] = query.question;
  doc["key_objects"] = nlohmann::json::array();
  doc["cue_objects"] = nlohmann::json::array();
  for (const auto& obj : query.objects) {
    auto& list = obj.kind == ObjectKind::key ? doc["key_objects"] : doc["cue_objects"];
    list.push_back({{"label", obj.label}, {"weight", obj.weight}});
  }
  doc["relations"] = nlohmann::json::array();
  for (const auto& rel : query.relations) {
    doc["relations"].push_back(
        {{"subject", rel.subject}, {"type", to_string(rel.type)}, {"object", rel.object}});
  }
  return doc;
}

QuerySpec query_from_json(const nlohmann::json& doc) {
  try {
    if (!doc.is_object()) throw Error(ErrorCode::InvalidQuery, "query document must be an object");
    QuerySpec query;
    query.question = doc.value("question", std::string());
    const auto read_objects = [&](const char* field, ObjectKind kind, double default_weight) {
      if (!doc.contains(field)) return;
      for (const auto& item : doc.at(field)) {
        WeightedObject obj;
        obj.kind = kind;
        if (item.is_string()) {
          obj.label = item.get<std::string>();
          obj.weight = default_weight;
        } else {
          obj.label = item.at("label").get<std::string>();
          obj.weight = item.value("weight", default_weight);
        }
        query.objects.push_back(std::move(obj));
      }
    };
    read_objects("key_objects", ObjectKind::key, kDefaultKeyWeight);
    read_objects("cue_objects", ObjectKind::cue, kDefaultCueWeight);
    if (doc.contains("relations")) {
      for (const auto& item : doc.at("relations")) {
        RelationTriplet rel;
        rel.subject = item.at("subject").get<std::string>();
        rel.type = parse_relation_type(item.at("type").get<std::string>());
        rel.object = item.at("object").get<std::string>();
        query.relations.push_back(std::move(rel));
      }
    }
    return query;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidQuery, std::string("malformed query JSON: ") + e.what());
  }
}

QuerySpec load_query_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  const std::string_view body = trim(text);
  if (!body.empty() && body.front() == '{') {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::InvalidQuery, path.string() + ": " + e.what());
    }
    return query_from_json(doc);
  }
  return parse_grounding_text(text);
}

}  // namespace vsls
