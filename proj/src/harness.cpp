#include "spargcp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>
#include <unordered_map>

#include "spargcp/common.hpp"
#include "spargcp/conformal.hpp"
#include "spargcp/models.hpp"
#include "spargcp/synthetic.hpp"

namespace spargcp {

namespace {

struct CellOutput {
  std::vector<ResultRecord> records;
  std::vector<EpochLog> log;
};

Matrix gather_rows(const Matrix& src, const std::vector<std::size_t>& rows) {
  Matrix out(rows.size(), src.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < src.cols(); ++c)
      out(i, c) = src(rows[i], c);
  return out;
}

CellOutput run_train_split(const ExperimentConfig& cfg,
                           const AttributedGraph& g,
                           const std::string& hash,
                           std::size_t split_index) {
  const NodeSplit split = split_nodes(
      g, SplitRatios{}, Rng::derive(cfg.base_seed, "split", split_index));

  const bool joint = cfg.method == "spargcp";
  AttributedGraph restricted;
  const AttributedGraph* active = &g;
  std::vector<std::uint32_t> train_nodes = split.train;
  double edge_drop = 0.0;
  if (cfg.method == "kcore") {
    const KcoreResult kc = kcore_subgraph(g, cfg.k);
    restricted = restrict_edges_to(g, kc.retained);
    active = &restricted;
    std::vector<std::uint32_t> kept;
    for (std::uint32_t v : split.train)
      if (kc.retained[v]) kept.push_back(v);
    if (kept.empty())
      throw ValidationError("kcore: train split " +
                            std::to_string(split_index) +
                            " has no nodes left inside the " +
                            std::to_string(cfg.k) + "-core");
    train_nodes = std::move(kept);
    if (g.num_edges() > 0)
      edge_drop = 1.0 - static_cast<double>(restricted.num_edges()) /
                            static_cast<double>(g.num_edges());
  } else if (cfg.method == "dropedge") {
    edge_drop = cfg.p;
  }

  ModelConfig mc;
  mc.backbone = backbone_from_string(cfg.backbone);
  mc.input_dim = g.feature_dim();
  mc.hidden_dim = cfg.hidden_dim;
  mc.output_dim = static_cast<std::size_t>(g.num_classes);
  mc.num_layers = cfg.num_layers;
  mc.with_scorers = joint;
  GnnModel model(mc, Rng::derive(cfg.base_seed, "model", split_index));

  TrainOptions opts;
  opts.gamma = joint ? cfg.gamma : 0.0;
  opts.lambda = joint ? cfg.lambda : 0.0;
  opts.alpha_train = cfg.alpha_train;
  opts.dropedge_p = cfg.method == "dropedge" ? cfg.p : 0.0;
  opts.epochs = cfg.epochs;
  opts.batch_size = cfg.batch_size;
  opts.learning_rate = cfg.learning_rate;
  opts.fanouts = cfg.fanouts;
  opts.seed = Rng::derive(cfg.base_seed, "train", split_index);
  opts.record_timing = cfg.record_timing;

  CellOutput out;
  out.log = train(model, *active, train_nodes, split.valid, opts).log;

  // Calib and test draw from one fixed pool; predict it once.
  std::vector<std::uint32_t> pool;
  pool.reserve(split.calib.size() + split.test.size());
  std::merge(split.calib.begin(), split.calib.end(), split.test.begin(),
             split.test.end(), std::back_inserter(pool));
  ForwardStats stats;
  const Matrix pool_probs =
      predict_probs(model, *active, pool, opts.gamma, &stats);
  if (joint) edge_drop = stats.edge_drop_fraction();
  std::unordered_map<std::uint32_t, std::size_t> row_of;
  row_of.reserve(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) row_of[pool[i]] = i;

  out.records.reserve(cfg.num_resplits);
  for (std::size_t r = 0; r < cfg.num_resplits; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    const NodeSplit rs = resplit_calib_test(
        split, Rng::derive(cfg.base_seed, "resplit",
                           split_index * 1000003ull + r));

    std::vector<std::size_t> calib_rows, test_rows;
    std::vector<std::int32_t> calib_labels, test_labels;
    for (std::uint32_t v : rs.calib) {
      calib_rows.push_back(row_of.at(v));
      calib_labels.push_back(g.labels[v]);
    }
    for (std::uint32_t v : rs.test) {
      test_rows.push_back(row_of.at(v));
      test_labels.push_back(g.labels[v]);
    }

    const auto cal =
        calibrate(gather_rows(pool_probs, calib_rows), calib_labels,
                  cfg.alpha);
    const auto sets =
        predict_sets(gather_rows(pool_probs, test_rows), cal.threshold);

    ResultRecord rec;
    rec.config_hash = hash;
    rec.train_split = split_index;
    rec.resplit = r;
    rec.method = cfg.method;
    rec.backbone = cfg.backbone;
    rec.alpha = cfg.alpha;
    rec.gamma = cfg.gamma;
    rec.lambda = cfg.lambda;
    rec.coverage_value = coverage(sets, test_labels);
    rec.efficiency_value = efficiency(sets);
    rec.edge_drop_frac = edge_drop;
    if (cfg.record_timing)
      rec.seconds = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    out.records.push_back(rec);
  }
  return out;
}

}  // namespace

AttributedGraph load_experiment_graph(const ExperimentConfig& cfg) {
  if (cfg.use_synthetic) return generate_sbm(cfg.synthetic);
  return load_graph(cfg.dataset.edges, cfg.dataset.features,
                    cfg.dataset.labels, cfg.dataset.undirected);
}

ExperimentOutput run_experiment(const ExperimentConfig& cfg,
                                const AttributedGraph& g) {
  validate_config(cfg);
  if (g.num_classes <= 0)
    throw ValidationError("run_experiment: the graph has no labels");
  const std::string hash = config_fingerprint(cfg);

  std::vector<CellOutput> cells(cfg.num_train_splits);
  const std::size_t workers =
      std::min<std::size_t>(cfg.threads, cfg.num_train_splits);
  if (workers <= 1) {
    for (std::size_t s = 0; s < cfg.num_train_splits; ++s)
      cells[s] = run_train_split(cfg, g, hash, s);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      threads.emplace_back([&] {
        while (true) {
          const std::size_t s = next.fetch_add(1);
          if (s >= cells.size()) return;
          try {
            cells[s] = run_train_split(cfg, g, hash, s);
          } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            return;
          }
        }
      });
    }
    for (std::thread& t : threads) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  ExperimentOutput out;
  out.records.reserve(cfg.num_train_splits * cfg.num_resplits);
  out.train_logs.reserve(cfg.num_train_splits);
  for (CellOutput& cell : cells) {
    out.records.insert(out.records.end(), cell.records.begin(),
                       cell.records.end());
    out.train_logs.push_back(std::move(cell.log));
  }
  out.summary = summarize(cfg, out.records);
  return out;
}

Summary summarize(const ExperimentConfig& cfg,
                  const std::vector<ResultRecord>& records) {
  if (records.empty()) throw ValidationError("summarize: no records");
  Summary s;
  s.config_hash = config_fingerprint(cfg);
  s.method = cfg.method;
  s.backbone = cfg.backbone;
  s.alpha = cfg.alpha;
  s.gamma = cfg.gamma;
  s.lambda = cfg.lambda;
  s.records = records.size();
  const double n = static_cast<double>(records.size());
  for (const ResultRecord& r : records) {
    s.coverage_mean += r.coverage_value;
    s.efficiency_mean += r.efficiency_value;
    s.edge_drop_mean += r.edge_drop_frac;
  }
  s.coverage_mean /= n;
  s.efficiency_mean /= n;
  s.edge_drop_mean /= n;
  if (records.size() > 1) {
    double cv = 0.0, ev = 0.0;
    for (const ResultRecord& r : records) {
      cv += (r.coverage_value - s.coverage_mean) *
            (r.coverage_value - s.coverage_mean);
      ev += (r.efficiency_value - s.efficiency_mean) *
            (r.efficiency_value - s.efficiency_mean);
    }
    s.coverage_std = std::sqrt(cv / (n - 1.0));
    s.efficiency_std = std::sqrt(ev / (n - 1.0));
  }
  return s;
}

std::vector<ExperimentOutput> sweep(const ExperimentConfig& cfg,
                                    const std::string& param,
                                    const std::vector<double>& values,
                                    const AttributedGraph& g) {
  if (values.empty()) throw ConfigError("sweep: no values given");
  const bool applies =
      ((param == "gamma" || param == "lambda") && cfg.method == "spargcp") ||
      (param == "k" && cfg.method == "kcore") ||
      (param == "p" && cfg.method == "dropedge");
  if (param != "gamma" && param != "lambda" && param != "k" && param != "p")
    throw ConfigError("sweep: unknown parameter \"" + param + "\"");
  if (!applies)
    throw ConfigError("sweep: parameter \"" + param +
                      "\" does not apply to method " + cfg.method);

  std::vector<ExperimentOutput> outputs;
  outputs.reserve(values.size());
  for (double v : values) {
    ExperimentConfig point = cfg;
    if (param == "gamma") {
      point.gamma = v;
    } else if (param == "lambda") {
      point.lambda = v;
    } else if (param == "p") {
      point.p = v;
    } else {
      if (v < 0.0 || v != std::floor(v))
        throw ConfigError("sweep: k values must be non-negative integers");
      point.k = static_cast<std::size_t>(v);
    }
    validate_config(point);
    outputs.push_back(run_experiment(point, g));
  }
  return outputs;
}

void write_records_csv(const std::vector<ResultRecord>& records,
                       const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "config_hash,train_split,resplit,method,backbone,alpha,gamma,"
         "lambda,coverage,efficiency,edge_drop_frac,seconds\n";
  char buf[256];
  for (const ResultRecord& r : records) {
    std::snprintf(buf, sizeof buf,
                  "%s,%zu,%zu,%s,%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.3f\n",
                  r.config_hash.c_str(), r.train_split, r.resplit,
                  r.method.c_str(), r.backbone.c_str(), r.alpha, r.gamma,
                  r.lambda, r.coverage_value, r.efficiency_value,
                  r.edge_drop_frac, r.seconds);
    out << buf;
  }
  if (!out) throw IoError("failed while writing " + path);
}

void write_summary_csv(const std::vector<Summary>& rows,
                       const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "config_hash,method,backbone,alpha,gamma,lambda,records,"
         "coverage_mean,coverage_std,efficiency_mean,efficiency_std,"
         "edge_drop_frac_mean\n";
  char buf[256];
  for (const Summary& s : rows) {
    std::snprintf(buf, sizeof buf,
                  "%s,%s,%s,%.6f,%.6f,%.6f,%zu,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                  s.config_hash.c_str(), s.method.c_str(), s.backbone.c_str(),
                  s.alpha, s.gamma, s.lambda, s.records, s.coverage_mean,
                  s.coverage_std, s.efficiency_mean, s.efficiency_std,
                  s.edge_drop_mean);
    out << buf;
  }
  if (!out) throw IoError("failed while writing " + path);
}

}  // namespace spargcp
