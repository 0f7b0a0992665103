#include "spargcp/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "spargcp/common.hpp"

namespace spargcp {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw ConfigError("unknown key \"" + it.key() + "\" in " + where);
}

double as_double(const json& j, const std::string& key) {
  if (!j.at(key).is_number())
    throw ConfigError("\"" + key + "\" must be a number");
  return j.at(key).get<double>();
}

std::uint64_t as_uint(const json& j, const std::string& key) {
  const json& v = j.at(key);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  throw ConfigError("\"" + key + "\" must be a non-negative integer");
}

bool as_bool(const json& j, const std::string& key) {
  if (!j.at(key).is_boolean())
    throw ConfigError("\"" + key + "\" must be true or false");
  return j.at(key).get<bool>();
}

std::string as_string(const json& j, const std::string& key) {
  if (!j.at(key).is_string())
    throw ConfigError("\"" + key + "\" must be a string");
  return j.at(key).get<std::string>();
}

SbmSpec sbm_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  reject_unknown_keys(j,
                      {"blocks", "nodes_per_block", "p_intra", "p_inter",
                       "feature_dim", "sigma", "noise_edge_fraction", "seed"},
                      where);
  SbmSpec spec;
  if (j.contains("blocks")) spec.blocks = as_uint(j, "blocks");
  if (j.contains("nodes_per_block"))
    spec.nodes_per_block = as_uint(j, "nodes_per_block");
  if (j.contains("p_intra")) spec.p_intra = as_double(j, "p_intra");
  if (j.contains("p_inter")) spec.p_inter = as_double(j, "p_inter");
  if (j.contains("feature_dim")) spec.feature_dim = as_uint(j, "feature_dim");
  if (j.contains("sigma")) spec.sigma = as_double(j, "sigma");
  if (j.contains("noise_edge_fraction"))
    spec.noise_edge_fraction = as_double(j, "noise_edge_fraction");
  if (j.contains("seed")) spec.seed = as_uint(j, "seed");
  return spec;
}

json sbm_to_json(const SbmSpec& spec) {
  json j;
  j["blocks"] = spec.blocks;
  j["nodes_per_block"] = spec.nodes_per_block;
  j["p_intra"] = spec.p_intra;
  j["p_inter"] = spec.p_inter;
  j["feature_dim"] = spec.feature_dim;
  j["sigma"] = spec.sigma;
  j["noise_edge_fraction"] = spec.noise_edge_fraction;
  j["seed"] = spec.seed;
  return j;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json parse_document(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  const json j = parse_document(json_text, "config");
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown_keys(
      j,
      {"dataset",      "synthetic",     "method",
       "backbone",     "alpha",         "alpha_train",
       "gamma",        "lambda",        "k",
       "p",            "hidden_dim",    "num_layers",
       "heads",        "fanouts",       "epochs",
       "batch_size",   "learning_rate", "num_train_splits",
       "num_resplits", "base_seed",     "output",
       "threads",      "record_timing"},
      "config");

  ExperimentConfig cfg;
  const bool has_dataset = j.contains("dataset");
  const bool has_synth = j.contains("synthetic");
  if (has_dataset == has_synth)
    throw ConfigError(
        "config needs exactly one of \"dataset\" and \"synthetic\"");
  if (has_synth) {
    cfg.use_synthetic = true;
    cfg.synthetic = sbm_from_json(j.at("synthetic"), "\"synthetic\"");
  } else {
    const json& d = j.at("dataset");
    if (!d.is_object()) throw ConfigError("\"dataset\" must be an object");
    reject_unknown_keys(d, {"edges", "features", "labels", "undirected"},
                        "\"dataset\"");
    cfg.dataset.edges = as_string(d, "edges");
    cfg.dataset.features = as_string(d, "features");
    cfg.dataset.labels = as_string(d, "labels");
    if (d.contains("undirected"))
      cfg.dataset.undirected = as_bool(d, "undirected");
  }

  if (j.contains("method")) cfg.method = as_string(j, "method");
  if (j.contains("backbone")) cfg.backbone = as_string(j, "backbone");
  if (j.contains("alpha")) cfg.alpha = as_double(j, "alpha");
  if (j.contains("alpha_train")) cfg.alpha_train = as_double(j, "alpha_train");
  if (j.contains("gamma")) cfg.gamma = as_double(j, "gamma");
  if (j.contains("lambda")) cfg.lambda = as_double(j, "lambda");
  if (j.contains("k")) cfg.k = as_uint(j, "k");
  if (j.contains("p")) cfg.p = as_double(j, "p");
  if (j.contains("hidden_dim")) cfg.hidden_dim = as_uint(j, "hidden_dim");
  if (j.contains("num_layers")) cfg.num_layers = as_uint(j, "num_layers");
  if (j.contains("heads")) cfg.heads = as_uint(j, "heads");
  if (j.contains("fanouts")) {
    const json& f = j.at("fanouts");
    if (!f.is_array()) throw ConfigError("\"fanouts\" must be an array");
    for (const json& item : f) {
      if (!item.is_number_unsigned() || item.get<std::uint64_t>() == 0)
        throw ConfigError("\"fanouts\" entries must be positive integers");
      cfg.fanouts.push_back(item.get<std::size_t>());
    }
  }
  if (j.contains("epochs")) cfg.epochs = as_uint(j, "epochs");
  if (j.contains("batch_size")) cfg.batch_size = as_uint(j, "batch_size");
  if (j.contains("learning_rate"))
    cfg.learning_rate = as_double(j, "learning_rate");
  if (j.contains("num_train_splits"))
    cfg.num_train_splits = as_uint(j, "num_train_splits");
  if (j.contains("num_resplits")) cfg.num_resplits = as_uint(j, "num_resplits");
  if (j.contains("base_seed")) cfg.base_seed = as_uint(j, "base_seed");
  if (j.contains("output")) cfg.output = as_string(j, "output");
  if (j.contains("threads")) cfg.threads = as_uint(j, "threads");
  if (j.contains("record_timing"))
    cfg.record_timing = as_bool(j, "record_timing");

  validate_config(cfg);
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  return parse_config(read_file(path));
}

SbmSpec parse_sbm_spec(const std::string& json_text) {
  return sbm_from_json(parse_document(json_text, "sbm spec"), "sbm spec");
}

SbmSpec load_sbm_spec_file(const std::string& path) {
  return parse_sbm_spec(read_file(path));
}

void validate_config(const ExperimentConfig& cfg) {
  const std::set<std::string> methods = {"vanilla", "kcore", "dropedge",
                                         "spargcp"};
  if (!methods.count(cfg.method))
    throw ConfigError("method \"" + cfg.method +
                      "\" is not one of vanilla, kcore, dropedge, spargcp");
  if (cfg.backbone != "gcn" && cfg.backbone != "gat")
    throw ConfigError("backbone \"" + cfg.backbone +
                      "\" is not one of gcn, gat");
  if (!(cfg.alpha > 0.0) || !(cfg.alpha < 1.0))
    throw ConfigError("alpha must lie in (0, 1)");
  if (!(cfg.alpha_train > 0.0) || !(cfg.alpha_train < 1.0))
    throw ConfigError("alpha_train must lie in (0, 1)");
  if (cfg.gamma < 0.0 || cfg.gamma >= 1.0)
    throw ConfigError("gamma must lie in [0, 1)");
  if (cfg.lambda < 0.0 || !std::isfinite(cfg.lambda))
    throw ConfigError("lambda must be finite and non-negative");
  if (cfg.p < 0.0 || cfg.p >= 1.0)
    throw ConfigError("p must lie in [0, 1)");

  if (cfg.method != "spargcp" && (cfg.gamma != 0.0 || cfg.lambda != 0.0))
    throw ConfigError("gamma and lambda only apply to method spargcp");
  if (cfg.method != "kcore" && cfg.k != 0)
    throw ConfigError("k only applies to method kcore");
  if (cfg.method != "dropedge" && cfg.p != 0.0)
    throw ConfigError("p only applies to method dropedge");

  if (cfg.hidden_dim == 0) throw ConfigError("hidden_dim must be positive");
  if (cfg.num_layers == 0) throw ConfigError("num_layers must be positive");
  if (cfg.heads != 2)
    throw ConfigError("heads: this build supports exactly 2 attention heads");
  if (!cfg.fanouts.empty() && cfg.fanouts.size() != cfg.num_layers)
    throw ConfigError("fanouts must list one fanout per layer");
  if (cfg.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(cfg.learning_rate > 0.0))
    throw ConfigError("learning_rate must be positive");
  if (cfg.num_train_splits == 0)
    throw ConfigError("num_train_splits must be positive");
  if (cfg.num_resplits == 0) throw ConfigError("num_resplits must be positive");
  if (cfg.threads == 0) throw ConfigError("threads must be positive");
  if (!cfg.use_synthetic &&
      (cfg.dataset.edges.empty() || cfg.dataset.features.empty() ||
       cfg.dataset.labels.empty()))
    throw ConfigError("dataset needs edges, features, and labels paths");
}

std::string canonical_config_json(const ExperimentConfig& cfg) {
  json j;
  if (cfg.use_synthetic) {
    j["synthetic"] = sbm_to_json(cfg.synthetic);
  } else {
    j["dataset"] = {{"edges", cfg.dataset.edges},
                    {"features", cfg.dataset.features},
                    {"labels", cfg.dataset.labels},
                    {"undirected", cfg.dataset.undirected}};
  }
  j["method"] = cfg.method;
  j["backbone"] = cfg.backbone;
  j["alpha"] = cfg.alpha;
  j["alpha_train"] = cfg.alpha_train;
  j["gamma"] = cfg.gamma;
  j["lambda"] = cfg.lambda;
  j["k"] = cfg.k;
  j["p"] = cfg.p;
  j["hidden_dim"] = cfg.hidden_dim;
  j["num_layers"] = cfg.num_layers;
  j["heads"] = cfg.heads;
  j["fanouts"] = cfg.fanouts;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["learning_rate"] = cfg.learning_rate;
  j["num_train_splits"] = cfg.num_train_splits;
  j["num_resplits"] = cfg.num_resplits;
  j["base_seed"] = cfg.base_seed;
  j["record_timing"] = cfg.record_timing;
  return j.dump();
}

std::string config_fingerprint(const ExperimentConfig& cfg) {
  const std::uint64_t h = fnv1a64(canonical_config_json(cfg));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace spargcp
