#include <cmath>

#include "vsls/error.hpp"
#include "vsls/search.hpp"

namespace vsls {

double SearchConfig::gamma(RelationType type) const {
  switch (type) {
    case RelationType::spatial: return gamma_spatial;
    case RelationType::attribute: return gamma_attribute;
    case RelationType::time: return gamma_time;
    case RelationType::causal: return gamma_causal;
  }
  return 0.0;
}

void SearchConfig::set_all_gammas(double value) {
  gamma_spatial = gamma_attribute = gamma_time = gamma_causal = value;
}

void SearchConfig::validate() const {
  const auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
  for (double v : {alpha, gamma_spatial, gamma_attribute, gamma_time, gamma_causal, tau,
                   gaussian_sigma, thompson_alpha0, thompson_beta0, found_threshold}) {
    if (!std::isfinite(v)) fail("configuration values must be finite");
  }
  if (K < 1) fail("K must be >= 1");
  if (!(tau > 0.0 && tau < 1.0)) fail("tau must lie in (0, 1)");
  if (delta_t < 0) fail("delta_t must be >= 0");
  if (diffusion_window < 0) fail("diffusion_window must be >= 0");
  if (k_max < 1) fail("k_max must be >= 1");
  if (diffusion_kernel == DiffusionKernel::gaussian && !(gaussian_sigma > 0.0)) {
    fail("gaussian_sigma must be > 0");
  }
  if (sampler == SamplerKind::thompson && !(thompson_alpha0 > 0.0 && thompson_beta0 > 0.0)) {
    fail("thompson priors must be > 0");
  }
  if (budget && *budget < 1) fail("budget must be >= 1");
  if (trace_stride < 1) fail("trace_stride must be >= 1");
}

int iteration_cap(double duration_seconds) {
  const double tenth = std::floor(0.1 * std::max(duration_seconds, 0.0));
  return static_cast<int>(std::max(1.0, std::min(1000.0, tenth)));
}

nlohmann::json config_to_json(const SearchConfig& cfg) {
  nlohmann::json doc{
      {"K", cfg.K},
      {"alpha", cfg.alpha},
      {"gamma_spatial", cfg.gamma_spatial},
      {"gamma_attribute", cfg.gamma_attribute},
      {"gamma_time", cfg.gamma_time},
      {"gamma_causal", cfg.gamma_causal},
      {"tau", cfg.tau},
      {"delta_t", cfg.delta_t},
      {"diffusion_window", cfg.diffusion_window},
      {"diffusion_kernel",
       cfg.diffusion_kernel == DiffusionKernel::gaussian ? "gaussian" : "inverse_distance"},
      {"gaussian_sigma", cfg.gaussian_sigma},
      {"sampler", cfg.sampler == SamplerKind::thompson ? "thompson" : "score_proportional"},
      {"thompson_alpha0", cfg.thompson_alpha0},
      {"thompson_beta0", cfg.thompson_beta0},
      {"k_max", cfg.k_max},
      {"found_threshold", cfg.found_threshold},
      {"seed", cfg.seed},
      {"enable_relations", cfg.enable_relations},
      {"trace_stride", cfg.trace_stride},
  };
  doc["budget"] = cfg.budget ? nlohmann::json(*cfg.budget) : nlohmann::json(nullptr);
  return doc;
}

SearchConfig config_from_json(const nlohmann::json& doc, SearchConfig cfg) {
  if (!doc.is_object()) throw Error(ErrorCode::InvalidConfig, "config must be a JSON object");
  try {
    const auto get = [&](const char* key, auto& field) {
      if (doc.contains(key)) field = doc.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("K", cfg.K);
    get("alpha", cfg.alpha);
    if (doc.contains("gamma")) cfg.set_all_gammas(doc.at("gamma").get<double>());
    get("gamma_spatial", cfg.gamma_spatial);
    get("gamma_attribute", cfg.gamma_attribute);
    get("gamma_time", cfg.gamma_time);
    get("gamma_causal", cfg.gamma_causal);
    get("tau", cfg.tau);
    get("delta_t", cfg.delta_t);
    get("diffusion_window", cfg.diffusion_window);
    get("gaussian_sigma", cfg.gaussian_sigma);
    get("thompson_alpha0", cfg.thompson_alpha0);
    get("thompson_beta0", cfg.thompson_beta0);
    get("k_max", cfg.k_max);
    get("found_threshold", cfg.found_threshold);
    get("seed", cfg.seed);
    get("enable_relations", cfg.enable_relations);
    get("trace_stride", cfg.trace_stride);
    if (doc.contains("budget")) {
      const auto& b = doc.at("budget");
      cfg.budget = b.is_null() ? std::nullopt : std::optional<std::int64_t>(b.get<std::int64_t>());
    }
    if (doc.contains("diffusion_kernel")) {
      const auto kernel = doc.at("diffusion_kernel").get<std::string>();
      if (kernel == "inverse_distance") cfg.diffusion_kernel = DiffusionKernel::inverse_distance;
      else if (kernel == "gaussian") cfg.diffusion_kernel = DiffusionKernel::gaussian;
      else throw Error(ErrorCode::InvalidConfig, "unknown diffusion_kernel '" + kernel + "'");
    }
    if (doc.contains("sampler")) {
      const auto sampler = doc.at("sampler").get<std::string>();
      if (sampler == "score_proportional") cfg.sampler = SamplerKind::score_proportional;
      else if (sampler == "thompson") cfg.sampler = SamplerKind::thompson;
      else throw Error(ErrorCode::InvalidConfig, "unknown sampler '" + sampler + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("malformed config: ") + e.what());
  }
  return cfg;
}

}  // namespace vsls
