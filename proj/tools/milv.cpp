// Command-line front end: one subcommand per pipeline stage plus `pipeline`,
// which runs train -> predict -> eval end to end.

#include "milv/milv.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace milv;

namespace {

struct Common {
  unsigned threads = 1;
};

void add_common(CLI::App* sub, Common& common) {
  // Consumed by expand_config before parsing; registered for --help.
  sub->add_option("--config", "Flat key=value config file ('#' comments); flags override it");
  sub->add_option("--threads", common.threads, "Worker threads (0 = all cores); results do not depend on it");
}

struct LabelViewArgs {
  std::string metric_path;
  std::string pool_path;
  Index k = 50;
  double lambda = 1.0;

  void add(CLI::App* sub) {
    sub->add_option("--metric", metric_path, "Metric projection (MILW); enables the label view");
    sub->add_option("--cpool", pool_path, "Candidate pool (MILQ) for the label view");
    sub->add_option("--k", k, "Label-view neighbors")->capture_default_str();
    sub->add_option("--lambda", lambda, "Label-view weight")->capture_default_str();
  }

  bool enabled() const { return !metric_path.empty() || !pool_path.empty(); }
};

/// Loaded label-view models; keeps the setup's pointers valid.
struct LabelViewModels {
  metric::MetricProjection projection;
  labelview::CandidatePool pool;
  labelview::LabelViewSetup setup;

  explicit LabelViewModels(const LabelViewArgs& a)
      : projection(metric::load(a.metric_path)), pool(labelview::load(a.pool_path)) {
    setup = labelview::LabelViewSetup{&projection, &pool, a.k, a.lambda};
  }
};

std::vector<Matrix> views_for(const Dataset& bags, const std::string& pca_path, const LabelViewArgs& lv) {
  if (pca_path.empty()) {
    if (lv.enabled()) throw InvalidArgument("the label view needs --pca for the feature view");
    std::vector<Matrix> raw;
    for (const auto& b : bags.bags) raw.push_back(b.instances);
    return raw;
  }
  const auto model = pca::load(pca_path);
  if (!lv.enabled()) return pipeline::bag_views(bags, model, nullptr);
  if (lv.metric_path.empty() || lv.pool_path.empty()) throw InvalidArgument("the label view needs both --metric and --cpool");
  const LabelViewModels models(lv);
  return pipeline::bag_views(bags, model, &models.setup);
}

void write_trace(const std::string& path, const std::vector<double>& trace) {
  if (path.empty()) return;
  std::string text = "step,value\n";
  for (std::size_t i = 0; i < trace.size(); ++i) text += std::to_string(i) + "," + format_double(trace[i]) + "\n";
  io::write_file(path, text);
}

std::string format_fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string eval_report(const eval::MapResult& result, const std::vector<std::string>& class_names) {
  std::size_t width = 5;
  for (const auto& n : class_names) width = std::max(width, n.size());
  std::string out;
  auto line = [&](const std::string& name, const std::string& value) {
    out += name + std::string(width + 2 - name.size(), ' ') + value + "\n";
  };
  line("class", "AP");
  for (std::size_t c = 0; c < class_names.size(); ++c)
    line(class_names[c], result.per_class[c] ? format_fixed4(*result.per_class[c]) : "n/a (no positives)");
  line("mAP", format_fixed4(result.map));
  return out;
}

void write_pr_curves(const ScoreMatrix& scores, const Dataset& truth, eval::ApMode mode, const fs::path& dir) {
  fs::create_directories(dir);
  std::map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < truth.size(); ++i) row_of.emplace(truth.bags[i].id, i);
  for (Index c = 0; c < scores.scores.cols(); ++c) {
    std::vector<double> column(static_cast<std::size_t>(scores.scores.rows()));
    std::vector<std::uint8_t> positives(column.size());
    for (std::size_t i = 0; i < column.size(); ++i) {
      column[i] = scores.scores(static_cast<Index>(i), c);
      positives[i] = truth.bags[row_of.at(scores.bag_ids[i])].labels[static_cast<std::size_t>(c)];
    }
    if (std::find(positives.begin(), positives.end(), 1) == positives.end()) continue;
    const auto curve = eval::average_precision(column, positives, mode);
    std::string text = "rank,recall,precision\n";
    for (std::size_t r = 0; r < curve.recall.size(); ++r)
      text += std::to_string(r + 1) + "," + format_double(curve.recall[r]) + "," + format_double(curve.precision[r]) + "\n";
    io::write_file(dir / ("pr_" + scores.class_names[static_cast<std::size_t>(c)] + ".csv"), text);
  }
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

/// Replaces `--config FILE` with one `--key=value` argument per config line,
/// placed right after the subcommand so later command-line flags override them.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  for (std::size_t i = 1; i < args.size(); ++i) {
    std::string path;
    std::size_t consumed = 0;
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      consumed = 2;
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      consumed = 1;
    } else {
      continue;
    }
    args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i + consumed));
    auto given = [&](const std::string& key) {
      return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
        return a == "--" + key || a.rfind("--" + key + "=", 0) == 0;
      });
    };
    std::vector<std::string> injected;
    std::istringstream in(io::read_file(path));
    int line_no = 0;
    for (std::string line; std::getline(in, line);) {
      ++line_no;
      line = trim(line.substr(0, line.find('#')));
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw InvalidArgument(path + ":" + std::to_string(line_no) + ": expected key=value");
      const auto key = trim(line.substr(0, eq));
      if (!given(key)) injected.push_back("--" + key + "=" + trim(line.substr(eq + 1)));
    }
    args.insert(args.begin() + 2, injected.begin(), injected.end());
    break;
  }
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-view multi-instance recognition: Fisher-vector bags with a kNN label view"};
  app.require_subcommand(1);
  Common common;

  // synth -------------------------------------------------------------------
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic bag file and exemplar pool");
  add_common(synth_cmd, common);
  synth::SynthConfig sc;
  std::string synth_out, synth_pool_out, synth_test_out;
  std::size_t test_bags = 0;
  std::uint64_t test_seed = 0;
  bool test_seed_set = false;
  synth_cmd->add_option("--out", synth_out, "Output bag file (MILB)")->required();
  synth_cmd->add_option("--pool-out", synth_pool_out, "Output exemplar file (MILP)");
  synth_cmd->add_option("--test-out", synth_test_out, "Optional held-out bag file");
  synth_cmd->add_option("--test-bags", test_bags, "Bags in the held-out file")->capture_default_str();
  synth_cmd->add_option_function<std::uint64_t>("--test-seed", [&](std::uint64_t v) { test_seed = v; test_seed_set = true; },
                                                "Seed of the held-out file (default: seed + 1)");
  synth_cmd->add_option("--seed", sc.seed)->capture_default_str();
  synth_cmd->add_option("--classes", sc.num_classes)->capture_default_str();
  synth_cmd->add_option("--dim", sc.feature_dim)->capture_default_str();
  synth_cmd->add_option("--bags", sc.num_bags)->capture_default_str();
  synth_cmd->add_option("--instances-min", sc.instances_min)->capture_default_str();
  synth_cmd->add_option("--instances-max", sc.instances_max)->capture_default_str();
  synth_cmd->add_option("--spread", sc.class_cluster_spread)->capture_default_str();
  synth_cmd->add_option("--noise-scale", sc.noise_scale)->capture_default_str();
  synth_cmd->add_option("--background-fraction", sc.background_fraction)->capture_default_str();
  synth_cmd->add_option("--labels-min", sc.labels_min)->capture_default_str();
  synth_cmd->add_option("--labels-max", sc.labels_max)->capture_default_str();
  synth_cmd->add_option("--exemplars-per-class", sc.exemplars_per_class)->capture_default_str();
  synth_cmd->add_option("--pool-classes", sc.pool_classes, "Restrict exemplars to these classes")->delimiter(',');

  // pca-fit -----------------------------------------------------------------
  auto* pca_cmd = app.add_subcommand("pca-fit", "Fit the feature-view PCA on all instances of a bag file");
  add_common(pca_cmd, common);
  std::string pca_bags, pca_out;
  double pca_energy = 0.9;
  pca_cmd->add_option("--bags", pca_bags)->required();
  pca_cmd->add_option("--energy", pca_energy)->capture_default_str();
  pca_cmd->add_option("--out", pca_out, "Output PCA model (MILA)")->required();

  // lmnn-train --------------------------------------------------------------
  auto* lmnn_cmd = app.add_subcommand("lmnn-train", "Learn the metric projection on strong-label exemplars");
  add_common(lmnn_cmd, common);
  std::string lmnn_pool, lmnn_out, lmnn_trace;
  metric::LmnnConfig lc;
  lmnn_cmd->add_option("--pool", lmnn_pool, "Exemplar file (MILP)")->required();
  lmnn_cmd->add_option("--d-out", lc.d_out, "Output dimension (clamped to the input dimension)")->capture_default_str();
  lmnn_cmd->add_option("--khat", lc.khat)->capture_default_str();
  lmnn_cmd->add_option("--alpha", lc.alpha)->capture_default_str();
  lmnn_cmd->add_option("--lr", lc.learning_rate)->capture_default_str();
  lmnn_cmd->add_option("--epochs", lc.epochs)->capture_default_str();
  lmnn_cmd->add_option("--seed", lc.seed)->capture_default_str();
  lmnn_cmd->add_option("--out", lmnn_out, "Output projection (MILW)")->required();
  lmnn_cmd->add_option("--trace", lmnn_trace, "Optional loss-trace CSV");

  // pool-build --------------------------------------------------------------
  auto* pool_cmd = app.add_subcommand("pool-build", "Project exemplars into the candidate pool");
  add_common(pool_cmd, common);
  std::string pool_in, pool_metric, pool_out;
  pool_cmd->add_option("--pool", pool_in, "Exemplar file (MILP)")->required();
  pool_cmd->add_option("--metric", pool_metric, "Metric projection (MILW)")->required();
  pool_cmd->add_option("--out", pool_out, "Output candidate pool (MILQ)")->required();

  // gmm-train ---------------------------------------------------------------
  auto* gmm_cmd = app.add_subcommand("gmm-train", "Fit the GMM codebook on (fused) proposal vectors");
  add_common(gmm_cmd, common);
  std::string gmm_bags, gmm_pca, gmm_out, gmm_trace;
  LabelViewArgs gmm_lv;
  Index gmm_components = 128;
  std::size_t gmm_cap = 500000;
  gmm::EmConfig ec;
  gmm_cmd->add_option("--bags", gmm_bags)->required();
  gmm_cmd->add_option("--pca", gmm_pca, "Feature-view PCA (MILA)");
  gmm_lv.add(gmm_cmd);
  gmm_cmd->add_option("--components", gmm_components)->capture_default_str();
  gmm_cmd->add_option("--max-iter", ec.max_iter)->capture_default_str();
  gmm_cmd->add_option("--tol", ec.tol)->capture_default_str();
  gmm_cmd->add_option("--seed", ec.seed)->capture_default_str();
  gmm_cmd->add_option("--sigma-floor", ec.sigma_floor)->capture_default_str();
  gmm_cmd->add_option("--max-samples", gmm_cap, "Subsample cap for fitting")->capture_default_str();
  gmm_cmd->add_option("--out", gmm_out, "Output GMM (MILG)")->required();
  gmm_cmd->add_option("--trace", gmm_trace, "Optional log-likelihood trace CSV");

  // encode ------------------------------------------------------------------
  auto* enc_cmd = app.add_subcommand("encode", "Encode bags as normalized Fisher vectors");
  add_common(enc_cmd, common);
  std::string enc_bags, enc_gmm, enc_pca, enc_out;
  LabelViewArgs enc_lv;
  enc_cmd->add_option("--bags", enc_bags)->required();
  enc_cmd->add_option("--gmm", enc_gmm)->required();
  enc_cmd->add_option("--pca", enc_pca, "Feature-view PCA (MILA)");
  enc_lv.add(enc_cmd);
  enc_cmd->add_option("--out", enc_out, "Output matrix (MILM, ids in <out>.ids)")->required();

  // train -------------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "Train one-vs-all linear classifiers on encoded bags");
  add_common(train_cmd, common);
  std::string train_features, train_bags, train_out, train_loss = "hinge";
  classifier::TrainConfig tc;
  train_cmd->add_option("--features", train_features, "Encoded matrix (MILM)")->required();
  train_cmd->add_option("--bags", train_bags, "Bag file supplying the labels")->required();
  train_cmd->add_option("--loss", train_loss, "hinge or square")->capture_default_str();
  train_cmd->add_option("--reg", tc.reg)->capture_default_str();
  train_cmd->add_option("--lr", tc.learning_rate)->capture_default_str();
  train_cmd->add_option("--epochs", tc.epochs)->capture_default_str();
  train_cmd->add_option("--seed", tc.seed)->capture_default_str();
  train_cmd->add_option("--out", train_out, "Output classifier (MILC)")->required();

  // predict -----------------------------------------------------------------
  auto* pred_cmd = app.add_subcommand("predict", "Score bags with a bundle, or encoded features with a classifier");
  add_common(pred_cmd, common);
  std::string pred_bundle, pred_bags, pred_model, pred_features, pred_out;
  pred_cmd->add_option("--bundle", pred_bundle, "Bundle directory written by `pipeline`");
  pred_cmd->add_option("--bags", pred_bags, "Bag file to score (with --bundle)");
  pred_cmd->add_option("--model", pred_model, "Classifier (MILC)");
  pred_cmd->add_option("--features", pred_features, "Encoded matrix (MILM, with --model)");
  pred_cmd->add_option("--out", pred_out, "Output score CSV")->required();

  // eval --------------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("eval", "Per-class AP and mAP of a score CSV");
  add_common(eval_cmd, common);
  std::string eval_scores, eval_bags, eval_mode = "all", eval_pr, eval_out;
  eval_cmd->add_option("--scores", eval_scores)->required();
  eval_cmd->add_option("--bags", eval_bags, "Bag file supplying the labels")->required();
  eval_cmd->add_option("--mode", eval_mode, "all (all-points) or 11 (11-point)")->capture_default_str();
  eval_cmd->add_option("--pr-dir", eval_pr, "Write one PR-curve CSV per class here");
  eval_cmd->add_option("--out", eval_out, "Also write the table to this file");

  // pipeline ----------------------------------------------------------------
  auto* pipe_cmd = app.add_subcommand("pipeline", "Train, predict and evaluate end to end");
  add_common(pipe_cmd, common);
  pipeline::PipelineConfig pc;
  std::string p_train, p_test, p_pool, p_out, p_mode = "fev+lv", p_loss = "hinge", p_eval_mode = "all";
  bool quiet = false;
  pipe_cmd->add_option("--train", p_train, "Training bag file")->required();
  pipe_cmd->add_option("--test", p_test, "Test bag file to score and evaluate");
  pipe_cmd->add_option("--pool", p_pool, "Exemplar file (required for fev+lv)");
  pipe_cmd->add_option("--out", p_out, "Output directory")->required();
  pipe_cmd->add_option("--mode", p_mode, "fev or fev+lv")->capture_default_str();
  pipe_cmd->add_option("--components", pc.components)->capture_default_str();
  pipe_cmd->add_option("--pca-energy", pc.pca_energy)->capture_default_str();
  pipe_cmd->add_option("--k", pc.k)->capture_default_str();
  pipe_cmd->add_option("--khat", pc.khat)->capture_default_str();
  pipe_cmd->add_option("--alpha", pc.alpha)->capture_default_str();
  pipe_cmd->add_option("--lambdas", pc.lambdas, "Candidate label-view weights")->delimiter(',')->capture_default_str();
  pipe_cmd->add_option("--d-out", pc.d_out)->capture_default_str();
  pipe_cmd->add_option("--lmnn-lr", pc.lmnn_learning_rate)->capture_default_str();
  pipe_cmd->add_option("--lmnn-epochs", pc.lmnn_epochs)->capture_default_str();
  pipe_cmd->add_option("--em-max-iter", pc.em_max_iter)->capture_default_str();
  pipe_cmd->add_option("--em-tol", pc.em_tol)->capture_default_str();
  pipe_cmd->add_option("--sigma-floor", pc.sigma_floor)->capture_default_str();
  pipe_cmd->add_option("--gmm-max-samples", pc.gmm_max_samples)->capture_default_str();
  pipe_cmd->add_option("--cv-folds", pc.cv_folds)->capture_default_str();
  pipe_cmd->add_option("--loss", p_loss)->capture_default_str();
  pipe_cmd->add_option("--reg", pc.classifier.reg)->capture_default_str();
  pipe_cmd->add_option("--lr", pc.classifier.learning_rate)->capture_default_str();
  pipe_cmd->add_option("--epochs", pc.classifier.epochs)->capture_default_str();
  pipe_cmd->add_option("--seed", pc.seed)->capture_default_str();
  pipe_cmd->add_option("--eval-mode", p_eval_mode, "all or 11")->capture_default_str();
  pipe_cmd->add_flag("--quiet", quiet, "No progress log on stderr");

  std::vector<std::string> args;
  try {
    args = expand_config(std::vector<std::string>(argv, argv + argc));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::vector<char*> arg_ptrs;
  for (auto& a : args) arg_ptrs.push_back(a.data());
  CLI11_PARSE(app, static_cast<int>(arg_ptrs.size()), arg_ptrs.data());

  try {
    set_num_threads(common.threads);

    if (synth_cmd->parsed()) {
      const auto data = synth::generate(sc);
      write_bag_file(data.bags, synth_out);
      if (!synth_pool_out.empty()) write_pool_file(data.exemplars, synth_pool_out);
      if (!synth_test_out.empty()) {
        auto test_cfg = sc;
        test_cfg.seed = test_seed_set ? test_seed : sc.seed + 1;
        test_cfg.num_bags = test_bags > 0 ? test_bags : sc.num_bags;
        test_cfg.id_prefix = "test";
        write_bag_file(synth::generate(test_cfg).bags, synth_test_out);
      }
    } else if (pca_cmd->parsed()) {
      const auto bags = read_bag_file(pca_bags);
      const auto model = pca::fit(bags.stacked_instances(), pca_energy);
      pca::save(model, pca_out);
      std::cout << "kept " << model.output_dim() << " of " << model.input_dim() << " dimensions (energy "
                << format_double(model.energy_kept) << ")\n";
    } else if (lmnn_cmd->parsed()) {
      const auto pool = read_pool_file(lmnn_pool);
      lc.d_out = std::min(lc.d_out, pool.features.cols());
      const auto result = metric::train(pool.features, pool.classes, lc);
      metric::save(result.projection, lmnn_out);
      write_trace(lmnn_trace, result.trace);
      std::cout << "loss " << format_double(result.trace.front()) << " -> "
                << format_double(result.trace[result.best_epoch]) << "\n";
    } else if (pool_cmd->parsed()) {
      labelview::save(labelview::build_pool(read_pool_file(pool_in), metric::load(pool_metric)), pool_out);
    } else if (gmm_cmd->parsed()) {
      const auto bags = read_bag_file(gmm_bags);
      const auto views = views_for(bags, gmm_pca, gmm_lv);
      const auto result = gmm::fit_em(pipeline::subsample_rows(views, gmm_cap, ec.seed), gmm_components, ec);
      gmm::save(result.model, gmm_out);
      write_trace(gmm_trace, result.trace);
      std::cout << "log-likelihood " << format_double(result.trace.back()) << " after "
                << result.trace.size() - 1 << " iterations\n";
    } else if (enc_cmd->parsed()) {
      const auto bags = read_bag_file(enc_bags);
      const auto model = gmm::load(enc_gmm);
      write_matrix_file(fisher::encode_all(model, views_for(bags, enc_pca, enc_lv)), bags.ids(), enc_out);
    } else if (train_cmd->parsed()) {
      const auto features = read_matrix_file(train_features);
      const auto bags = read_bag_file(train_bags);
      if (features.ids != bags.ids()) throw Error("encoded rows and bag file list different bags or orders");
      bags.require_labeled();
      tc.loss = classifier::parse_loss(train_loss);
      const auto result = classifier::train_ova(features.values, bags.label_matrix(), tc);
      for (auto c : result.constant_classes)
        std::cerr << "warning: class " << bags.class_names[c] << " lacks positives or negatives; constant scorer\n";
      classifier::save(result.model, train_out);
    } else if (pred_cmd->parsed()) {
      ScoreMatrix scores;
      if (!pred_bundle.empty()) {
        if (pred_bags.empty()) throw InvalidArgument("--bundle needs --bags");
        scores = pipeline::run_predict(pipeline::load_bundle(pred_bundle), read_bag_file(pred_bags));
      } else {
        if (pred_model.empty() || pred_features.empty())
          throw InvalidArgument("predict needs --bundle/--bags or --model/--features");
        const auto model = classifier::load(pred_model);
        const auto features = read_matrix_file(pred_features);
        scores.bag_ids = features.ids;
        scores.class_names = default_class_names(static_cast<std::size_t>(model.num_classes()));
        scores.scores = classifier::predict(model, features.values);
      }
      write_scores_csv(scores, pred_out);
    } else if (eval_cmd->parsed()) {
      const auto scores = read_scores_csv(eval_scores);
      const auto truth = read_bag_file(eval_bags);
      const auto mode = eval::parse_mode(eval_mode);
      const auto result = pipeline::run_eval(scores, truth, mode);
      const auto report = eval_report(result, scores.class_names);
      std::cout << report;
      if (!eval_out.empty()) io::write_file(eval_out, report);
      if (!eval_pr.empty()) write_pr_curves(scores, truth, mode, eval_pr);
    } else if (pipe_cmd->parsed()) {
      pc.mode = pipeline::parse_mode(p_mode);
      pc.classifier.loss = classifier::parse_loss(p_loss);
      pc.classifier.seed = pc.seed;
      const auto eval_mode_value = eval::parse_mode(p_eval_mode);
      const fs::path out_dir(p_out);
      fs::create_directories(out_dir);
      std::ofstream log_file(out_dir / "pipeline.log");
      struct Tee : std::streambuf {
        std::streambuf* a;
        std::streambuf* b;
        int overflow(int c) override {
          if (c == EOF) return 0;
          if (a) a->sputc(static_cast<char>(c));
          if (b) b->sputc(static_cast<char>(c));
          return c;
        }
      } tee;
      tee.a = log_file.rdbuf();
      tee.b = quiet ? nullptr : std::cerr.rdbuf();
      std::ostream log_stream(&tee);
      const pipeline::Log log(&log_stream);

      const auto train = read_bag_file(p_train);
      std::optional<ExemplarSet> exemplars;
      if (!p_pool.empty()) exemplars = read_pool_file(p_pool);
      const auto bundle = pipeline::run_train(train, exemplars ? &*exemplars : nullptr, pc, log);
      pipeline::save_bundle(bundle, out_dir / "bundle");
      log("bundle", "written to " + (out_dir / "bundle").string());
      if (!p_test.empty()) {
        const auto test = read_bag_file(p_test);
        const auto scores = pipeline::run_predict(bundle, test);
        write_scores_csv(scores, out_dir / "scores.csv");
        log("predict", "scored " + std::to_string(test.size()) + " bags");
        if (std::any_of(test.bags.begin(), test.bags.end(), [](const Bag& b) { return b.has_labels(); })) {
          const auto report = eval_report(pipeline::run_eval(scores, test, eval_mode_value), scores.class_names);
          io::write_file(out_dir / "eval.txt", report);
          std::cout << report;
        }
      }
      log("done", "ok");
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
