#pragma once

#include "milv/classifier.hpp"
#include "milv/datamodel.hpp"
#include "milv/eval.hpp"
#include "milv/fisher.hpp"
#include "milv/gmm.hpp"
#include "milv/labelview.hpp"
#include "milv/metric.hpp"
#include "milv/pca.hpp"

#include <chrono>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace milv::pipeline {

enum class Mode { fev, fev_lv };

inline std::string to_string(Mode m) { return m == Mode::fev ? "fev" : "fev+lv"; }

inline Mode parse_mode(const std::string& s) {
  if (s == "fev") return Mode::fev;
  if (s == "fev+lv") return Mode::fev_lv;
  throw InvalidArgument("unknown pipeline mode '" + s + "' (expected fev or fev+lv)");
}

/// Defaults follow the reference setup: 128 codewords, 90% PCA energy, k=50
/// label-view neighbors, khat=10 target neighbors, alpha=1, lambda from {1, 0.5, 0.25}.
struct PipelineConfig {
  Mode mode = Mode::fev_lv;
  Index components = 128;
  double pca_energy = 0.9;
  Index k = 50;
  int khat = 10;
  double alpha = 1.0;
  std::vector<double> lambdas{1.0, 0.5, 0.25};
  /// Clamped to the raw feature dimension when larger.
  Index d_out = 128;
  double lmnn_learning_rate = 0.1;
  int lmnn_epochs = 200;
  int em_max_iter = 100;
  double em_tol = 1e-6;
  double sigma_floor = 1e-4;
  std::size_t gmm_max_samples = 500000;
  int cv_folds = 3;
  classifier::TrainConfig classifier{};
  std::uint64_t seed = 0;

  void validate() const {
    detail::require(components >= 1, "pipeline: components must be >= 1");
    detail::require(pca_energy > 0.0 && pca_energy <= 1.0, "pipeline: pca energy must be in (0, 1]");
    detail::require(k >= 1, "pipeline: k must be >= 1");
    detail::require(khat >= 1, "pipeline: khat must be >= 1");
    detail::require(alpha >= 0.0, "pipeline: alpha must be >= 0");
    detail::require(!lambdas.empty(), "pipeline: need at least one lambda");
    for (double l : lambdas) detail::require(l > 0.0 && std::isfinite(l), "pipeline: lambda must be > 0");
    detail::require(d_out >= 1, "pipeline: d_out must be >= 1");
    detail::require(gmm_max_samples >= 1, "pipeline: gmm sample cap must be >= 1");
    detail::require(cv_folds >= 2, "pipeline: need at least 2 cross-validation folds");
  }
};

/// Everything prediction needs.
struct Bundle {
  Mode mode = Mode::fev;
  pca::PcaModel pca;
  std::optional<metric::MetricProjection> projection;
  std::optional<labelview::CandidatePool> pool;
  gmm::GmmModel gmm;
  classifier::LinearClassifierSet classifier;
  Index k = 0;
  double lambda = 1.0;
  Index feature_dim = 0;
  std::vector<std::string> class_names;

  std::optional<labelview::LabelViewSetup> label_view() const {
    if (mode == Mode::fev) return std::nullopt;
    return labelview::LabelViewSetup{&*projection, &*pool, k, lambda};
  }
};

/// Line-oriented progress log: "[stage] message (elapsed s)".
class Log {
 public:
  explicit Log(std::ostream* sink = nullptr) : sink_(sink), start_(std::chrono::steady_clock::now()) {}

  void operator()(const std::string& stage, const std::string& message) const {
    if (!sink_) return;
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::ostringstream line;
    line.setf(std::ios::fixed);
    line.precision(3);
    line << "[" << stage << "] " << message << " (t=" << elapsed << "s)\n";
    *sink_ << line.str() << std::flush;
  }

 private:
  std::ostream* sink_;
  std::chrono::steady_clock::time_point start_;
};

/// Runs `fn`, rethrowing failures prefixed with the stage name.
template <typename Fn>
auto stage(const std::string& name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const std::exception& e) {
    throw Error("stage '" + name + "' failed: " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Building blocks shared by the pipeline and the individual CLI subcommands.

/// Per-bag proposal rows ready for GMM fitting and encoding.
inline std::vector<Matrix> bag_views(const Dataset& ds, const pca::PcaModel& feature_pca,
                                     const labelview::LabelViewSetup* lv) {
  std::vector<Matrix> out(ds.size());
  parallel_for(ds.size(), [&](std::size_t i) {
    out[i] = labelview::encode_bag_views(ds.bags[i].instances, feature_pca, lv);
  }, 2);
  return out;
}

/// Seeded uniform subsample (without replacement, original order kept) of at
/// most `cap` stacked rows.
inline Matrix subsample_rows(const std::vector<Matrix>& views, std::size_t cap, std::uint64_t seed) {
  detail::require(!views.empty(), "pipeline: no vectors to sample");
  Index total = 0;
  for (const auto& v : views) total += v.rows();
  const Index cols = views.front().cols();
  Matrix stacked(total, cols);
  Index row = 0;
  for (const auto& v : views) {
    stacked.middleRows(row, v.rows()) = v;
    row += v.rows();
  }
  if (static_cast<std::size_t>(total) <= cap) return stacked;

  Rng rng(seed);
  auto perm = rng.permutation(static_cast<std::size_t>(total));
  perm.resize(cap);
  std::sort(perm.begin(), perm.end());
  Matrix out(static_cast<Index>(cap), cols);
  for (std::size_t i = 0; i < cap; ++i) out.row(static_cast<Index>(i)) = stacked.row(static_cast<Index>(perm[i]));
  return out;
}

inline gmm::GmmModel fit_codebook(const std::vector<Matrix>& views, Index components, std::size_t cap,
                                  const gmm::EmConfig& em) {
  return gmm::fit_em(subsample_rows(views, cap, em.seed), components, em).model;
}

inline std::vector<Matrix> scaled_views(const std::vector<Matrix>& views, Index feature_cols, double lambda) {
  std::vector<Matrix> out(views);
  for (auto& v : out) v.rightCols(v.cols() - feature_cols) *= lambda;
  return out;
}

/// 3-fold (by default) out-of-fold mAP of the classifier on fixed features.
inline double cross_validated_map(const Matrix& features, const Matrix& labels, int folds,
                                  const classifier::TrainConfig& cfg, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(features.rows());
  detail::require(n >= static_cast<std::size_t>(folds), "pipeline: fewer bags than cross-validation folds");
  Rng rng(seed);
  const auto perm = rng.permutation(n);
  std::vector<int> fold_of(n);
  for (std::size_t i = 0; i < n; ++i) fold_of[perm[i]] = static_cast<int>(i % static_cast<std::size_t>(folds));

  Matrix oof(features.rows(), labels.cols());
  for (int f = 0; f < folds; ++f) {
    std::vector<Index> train_rows, held_rows;
    for (std::size_t i = 0; i < n; ++i) (fold_of[i] == f ? held_rows : train_rows).push_back(static_cast<Index>(i));
    const Matrix xf = features(train_rows, Eigen::all);
    const Matrix yf = labels(train_rows, Eigen::all);
    const auto model = classifier::train_ova(xf, yf, cfg).model;
    const Matrix held = features(held_rows, Eigen::all);
    oof(held_rows, Eigen::all) = classifier::predict(model, held);
  }
  return eval::mean_average_precision(oof, labels).map;
}

inline gmm::EmConfig em_config(const PipelineConfig& cfg) {
  return gmm::EmConfig{cfg.em_max_iter, cfg.em_tol, cfg.seed, cfg.sigma_floor};
}

inline metric::LmnnConfig lmnn_config(const PipelineConfig& cfg, Index input_dim) {
  metric::LmnnConfig out;
  out.alpha = cfg.alpha;
  out.khat = cfg.khat;
  out.d_out = std::min(cfg.d_out, input_dim);
  out.learning_rate = cfg.lmnn_learning_rate;
  out.epochs = cfg.lmnn_epochs;
  out.seed = cfg.seed;
  return out;
}

struct TrainReport {
  std::map<double, double> cv_map;  // lambda -> validation mAP
  std::vector<double> lmnn_trace;
  std::vector<std::size_t> constant_classes;
};

/// Full training flow: PCA on all training proposals, LMNN on the exemplars and
/// pool projection (label-view mode only), per-proposal fused views, GMM on a
/// capped subsample, normalized Fisher vectors, lambda selection by
/// cross-validated mAP when several candidates are given, then one-vs-all
/// classifiers on all training bags.
inline Bundle run_train(const Dataset& train, const ExemplarSet* exemplars, const PipelineConfig& cfg,
                        const Log& log = Log{}, TrainReport* report = nullptr) {
  cfg.validate();
  stage("validate", [&] {
    train.validate();
    train.require_labeled();
    if (cfg.mode == Mode::fev_lv) {
      detail::require(exemplars != nullptr, "label-view mode needs an exemplar pool");
      exemplars->validate();
      detail::require(exemplars->features.cols() == train.feature_dim, "exemplar dimension differs from bag features");
      detail::require(exemplars->num_classes == train.num_classes(), "exemplar class count differs from bags");
      detail::require(static_cast<Index>(exemplars->size()) >= cfg.k, "pool smaller than k");
    }
    return 0;
  });
  log("config", "mode=" + to_string(cfg.mode) + " K=" + std::to_string(cfg.components) + " k=" +
                    std::to_string(cfg.k) + " seed=" + std::to_string(cfg.seed) + " threads=" +
                    std::to_string(num_threads()));

  Bundle bundle;
  bundle.mode = cfg.mode;
  bundle.k = cfg.k;
  bundle.feature_dim = train.feature_dim;
  bundle.class_names = train.class_names;

  bundle.pca = stage("pca", [&] { return pca::fit(train.stacked_instances(), cfg.pca_energy); });
  log("pca", "kept " + std::to_string(bundle.pca.output_dim()) + " of " + std::to_string(bundle.pca.input_dim()) +
                 " dims, energy " + format_double(bundle.pca.energy_kept));

  if (cfg.mode == Mode::fev_lv) {
    auto lmnn = stage("lmnn", [&] {
      return metric::train(exemplars->features, exemplars->classes, lmnn_config(cfg, train.feature_dim));
    });
    log("lmnn", "loss " + format_double(lmnn.trace.front()) + " -> " + format_double(lmnn.trace[lmnn.best_epoch]) +
                    " after " + std::to_string(lmnn.trace.size() - 1) + " epochs");
    if (report) report->lmnn_trace = lmnn.trace;
    bundle.projection = std::move(lmnn.projection);
    bundle.pool = stage("pool", [&] { return labelview::build_pool(*exemplars, *bundle.projection); });
  }

  // Views at lambda = 1; the label-view block is rescaled per candidate.
  const auto unit_lv = bundle.mode == Mode::fev ? std::nullopt
                                                : std::optional(labelview::LabelViewSetup{
                                                      &*bundle.projection, &*bundle.pool, cfg.k, 1.0});
  const std::vector<Matrix> views =
      stage("views", [&] { return bag_views(train, bundle.pca, unit_lv ? &*unit_lv : nullptr); });
  log("views", std::to_string(train.total_instances()) + " proposals, dim " + std::to_string(views.front().cols()));

  const Matrix labels = train.label_matrix();
  const std::vector<double> candidates = cfg.mode == Mode::fev ? std::vector<double>{1.0} : cfg.lambdas;
  const auto feature_cols = bundle.pca.output_dim();

  struct Candidate {
    gmm::GmmModel gmm;
    Matrix fvs;
  };
  std::optional<Candidate> chosen;
  double best_map = -1.0;
  for (double lambda : candidates) {
    const auto scaled = scaled_views(views, feature_cols, lambda);
    Candidate cand;
    cand.gmm = stage("gmm", [&] { return fit_codebook(scaled, cfg.components, cfg.gmm_max_samples, em_config(cfg)); });
    cand.fvs = stage("encode", [&] { return fisher::encode_all(cand.gmm, scaled); });
    if (candidates.size() == 1) {
      bundle.lambda = lambda;
      chosen = std::move(cand);
      break;
    }
    const double map = stage("cross-validation", [&] {
      return cross_validated_map(cand.fvs, labels, cfg.cv_folds, cfg.classifier, cfg.seed);
    });
    log("cross-validation", "lambda=" + format_double(lambda) + " mAP=" + format_double(map));
    if (report) report->cv_map[lambda] = map;
    if (map > best_map) {
      best_map = map;
      bundle.lambda = lambda;
      chosen = std::move(cand);
    }
  }
  bundle.gmm = std::move(chosen->gmm);
  log("gmm", "fitted " + std::to_string(bundle.gmm.num_components()) + " components, lambda=" +
                 format_double(bundle.lambda));

  auto trained = stage("classifier", [&] { return classifier::train_ova(chosen->fvs, labels, cfg.classifier); });
  for (auto c : trained.constant_classes)
    log("classifier", "warning: class " + train.class_names[c] + " lacks positives or negatives; constant scorer");
  if (report) report->constant_classes = trained.constant_classes;
  bundle.classifier = std::move(trained.model);
  log("classifier", "trained " + std::to_string(bundle.classifier.num_classes()) + " one-vs-all scorers on " +
                        std::to_string(bundle.classifier.feature_dim()) + "-d Fisher vectors");
  return bundle;
}

/// Encodes bags with a trained bundle: rows are normalized Fisher vectors.
inline Matrix encode_with_bundle(const Bundle& bundle, const Dataset& bags) {
  detail::require(bags.feature_dim == bundle.feature_dim,
                  "bag feature dimension " + std::to_string(bags.feature_dim) + " does not match bundle (" +
                      std::to_string(bundle.feature_dim) + ")");
  const auto lv = bundle.label_view();
  return fisher::encode_all(bundle.gmm, bag_views(bags, bundle.pca, lv ? &*lv : nullptr));
}

inline ScoreMatrix run_predict(const Bundle& bundle, const Dataset& bags) {
  bags.validate();
  detail::require(bags.num_classes() == bundle.class_names.size(), "bag class count does not match bundle");
  ScoreMatrix out;
  out.bag_ids = bags.ids();
  out.class_names = bundle.class_names;
  out.scores = stage("predict", [&] { return classifier::predict(bundle.classifier, encode_with_bundle(bundle, bags)); });
  return out;
}

/// Matches score rows to bags by id and evaluates per-class AP and mAP.
inline eval::MapResult run_eval(const ScoreMatrix& scores, const Dataset& truth, eval::ApMode mode) {
  scores.validate();
  detail::require(scores.scores.cols() == static_cast<Index>(truth.num_classes()),
                  "score columns do not match the label file's class count");
  std::map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < truth.size(); ++i) row_of.emplace(truth.bags[i].id, i);
  Matrix labels(scores.scores.rows(), scores.scores.cols());
  for (std::size_t i = 0; i < scores.bag_ids.size(); ++i) {
    const auto it = row_of.find(scores.bag_ids[i]);
    if (it == row_of.end()) throw Error("scored bag '" + scores.bag_ids[i] + "' is missing from the label file");
    for (std::size_t c = 0; c < truth.num_classes(); ++c)
      labels(static_cast<Index>(i), static_cast<Index>(c)) = truth.bags[it->second].labels[c];
  }
  return eval::mean_average_precision(scores.scores, labels, mode);
}

// ---------------------------------------------------------------------------
// Bundle directory: pca.mila, gmm.milg, classifier.milc, optionally
// metric.milw + pool.milq, and bundle.txt (key=value metadata).

inline void save_bundle(const Bundle& b, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  pca::save(b.pca, dir / "pca.mila");
  gmm::save(b.gmm, dir / "gmm.milg");
  classifier::save(b.classifier, dir / "classifier.milc");
  if (b.mode == Mode::fev_lv) {
    metric::save(*b.projection, dir / "metric.milw");
    labelview::save(*b.pool, dir / "pool.milq");
  } else {
    std::filesystem::remove(dir / "metric.milw");
    std::filesystem::remove(dir / "pool.milq");
  }
  std::string meta = "format=1\nmode=" + to_string(b.mode) + "\nk=" + std::to_string(b.k) +
                     "\nlambda=" + format_double(b.lambda) + "\nfeature_dim=" + std::to_string(b.feature_dim) +
                     "\nclasses=";
  for (std::size_t c = 0; c < b.class_names.size(); ++c) meta += (c ? "," : "") + b.class_names[c];
  meta += "\n";
  io::write_file(dir / "bundle.txt", meta);
}

inline Bundle load_bundle(const std::filesystem::path& dir) {
  std::map<std::string, std::string> meta;
  std::istringstream in(io::read_file(dir / "bundle.txt"));
  for (std::string line; std::getline(in, line);) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) meta[line.substr(0, eq)] = line.substr(eq + 1);
  }
  for (const char* key : {"mode", "k", "lambda", "feature_dim", "classes"})
    if (!meta.count(key)) throw Error("bundle.txt is missing key '" + std::string(key) + "'");

  Bundle b;
  b.mode = parse_mode(meta["mode"]);
  b.k = std::stol(meta["k"]);
  b.lambda = parse_double(meta["lambda"], "in bundle.txt");
  b.feature_dim = std::stol(meta["feature_dim"]);
  b.class_names = split_csv_line(meta["classes"]);
  b.pca = pca::load(dir / "pca.mila");
  b.gmm = gmm::load(dir / "gmm.milg");
  b.classifier = classifier::load(dir / "classifier.milc");
  if (b.mode == Mode::fev_lv) {
    b.projection = metric::load(dir / "metric.milw");
    b.pool = labelview::load(dir / "pool.milq");
  }
  // Cross-artifact consistency.
  detail::require(b.pca.input_dim() == b.feature_dim, "bundle: PCA input does not match feature_dim");
  detail::require(b.classifier.num_classes() == static_cast<Index>(b.class_names.size()),
                  "bundle: classifier class count mismatch");
  detail::require(b.classifier.feature_dim() == fisher::encoded_length(b.gmm),
                  "bundle: classifier input does not match Fisher vector length");
  Index view_dim = b.pca.output_dim();
  if (b.mode == Mode::fev_lv) {
    detail::require(b.projection->input_dim() == b.feature_dim, "bundle: metric input does not match feature_dim");
    detail::require(b.pool->dim() == b.projection->output_dim(), "bundle: pool dimension mismatch");
    view_dim += b.k * static_cast<Index>(b.pool->num_classes);
  }
  detail::require(b.gmm.dim() == view_dim, "bundle: GMM dimension does not match view dimension");
  return b;
}

}  // namespace milv::pipeline
