// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include "oracles.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>

using namespace milv;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// 1 -------------------------------------------------------------------------------

/// True when some hinge argument changes sign within the finite-difference
/// stencil, i.e. the central difference straddles a kink.
bool stencil_crosses_kink(const Matrix& W, const Matrix& x, const std::vector<std::uint32_t>& classes,
                          const std::vector<std::vector<Index>>& eta, double h) {
  auto pattern = [&](const Matrix& w) {
    std::vector<bool> active;
    for (Index i = 0; i < x.rows(); ++i)
      for (Index j : eta[static_cast<std::size_t>(i)]) {
        const double dij = oracle::projected_distance(w, x, i, j);
        for (Index l = 0; l < x.rows(); ++l)
          if (classes[static_cast<std::size_t>(l)] != classes[static_cast<std::size_t>(i)])
            active.push_back(1.0 + dij - oracle::projected_distance(w, x, i, l) > 0.0);
      }
    return active;
  };
  const auto base = pattern(W);
  for (Index r = 0; r < W.rows(); ++r)
    for (Index c = 0; c < W.cols(); ++c)
      for (double sign : {-1.0, 1.0}) {
        Matrix shifted = W;
        shifted(r, c) += sign * h;
        if (pattern(shifted) != base) return true;
      }
  return false;
}

Outcome lmnn_gradient_check() {
  const auto start = std::chrono::steady_clock::now();
  const double h = 1e-5;
  std::mt19937_64 gen(2024);
  int checked = 0, skipped = 0;
  double worst = 0.0;
  while (checked < 20) {
    Matrix x = oracle::random_matrix(gen, 30, 8);
    std::vector<std::uint32_t> classes(30);
    for (std::size_t i = 0; i < 30; ++i) classes[i] = static_cast<std::uint32_t>(i % 3);
    const Matrix W = oracle::random_matrix(gen, 4, 8, 0.5);
    const auto targets = metric::select_target_neighbors(x, classes, 3);
    if (oracle::min_hinge_gap(W, x, classes, targets.eta) < 1e-6 ||
        stencil_crosses_kink(W, x, classes, targets.eta, h)) {
      ++skipped;
      continue;
    }
    const Matrix analytic = metric::lmnn_gradient({W}, x, classes, targets, 1.0);
    const Matrix numeric = oracle::finite_difference(
        W, [&](const Matrix& w) { return oracle::lmnn_loss_naive(w, x, classes, targets.eta, 1.0); }, h);
    worst = std::max(worst, (analytic - numeric).norm() / numeric.norm());
    ++checked;
  }
  const double elapsed = seconds_since(start);
  return {worst <= 1e-4 && elapsed < 60.0,
          std::to_string(checked) + " configs, max relative error " + fmt("%.2e", worst) + " (limit 1e-4), " +
              std::to_string(skipped) + " kink-adjacent skipped, " + fmt("%.1f", elapsed) + "s (limit 60s)"};
}

// 2 -------------------------------------------------------------------------------

Outcome em_monotonicity() {
  std::mt19937_64 gen(7);
  const auto truth = oracle::random_gmm(gen, 8, 16);
  std::discrete_distribution<int> pick(truth.weights.data(), truth.weights.data() + 8);
  std::normal_distribution<double> normal;
  Matrix x(2000, 16);
  for (Index i = 0; i < 2000; ++i) {
    const int k = pick(gen);
    for (Index d = 0; d < 16; ++d) x(i, d) = truth.means(k, d) + truth.stds(k, d) * normal(gen);
  }
  const auto start = std::chrono::steady_clock::now();
  const auto res = gmm::fit_em(x, 8, {50, 0.0, 1, 1e-4});
  const double elapsed = seconds_since(start);
  double worst = 0.0;
  for (std::size_t t = 1; t < res.trace.size(); ++t)
    worst = std::max(worst, (res.trace[t - 1] - res.trace[t]) / std::abs(res.trace[t - 1]));
  const bool ok = res.trace.size() == 51 && worst <= 1e-9 && elapsed < 30.0;
  return {ok, std::to_string(res.trace.size() - 1) + " iterations, LL " + fmt("%.3f", res.trace.front()) + " -> " +
                  fmt("%.3f", res.trace.back()) + ", largest relative drop " + fmt("%.2e", std::max(worst, 0.0)) +
                  " (limit 1e-9), " + fmt("%.2f", elapsed) + "s (limit 30s)"};
}

// 3 -------------------------------------------------------------------------------

Outcome fisher_oracle() {
  std::mt19937_64 gen(11);
  std::uniform_int_distribution<int> size(5, 60);
  double worst = 0.0;
  for (int b = 0; b < 50; ++b) {
    const auto model = oracle::random_gmm(gen, 16, 20);
    const Matrix bag = oracle::random_matrix(gen, size(gen), 20, 2.0);
    const Vector fv = fisher::encode(model, bag).values;
    const auto ref = oracle::fisher_naive(model, bag);
    for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(fv(static_cast<Index>(i)) - ref[i]));
  }
  return {worst <= 1e-10, "50 bags, K=16, D=20, max |diff| " + fmt("%.2e", worst) + " (limit 1e-10)"};
}

// 4 -------------------------------------------------------------------------------

Outcome knn_exactness() {
  std::mt19937_64 gen(13);
  std::uniform_int_distribution<int> coord(-2, 2);
  labelview::CandidatePool pool{Matrix(1000, 4), std::vector<std::uint32_t>(1000), 6};
  for (Index i = 0; i < 1000; ++i) {
    // Half the pool on an integer grid so equal distances (ties) are common.
    for (Index c = 0; c < 4; ++c) pool.features(i, c) = i % 2 ? coord(gen) : std::normal_distribution<double>()(gen);
    pool.classes[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(i % 6);
  }
  int mismatches = 0, tied_queries = 0;
  for (int q = 0; q < 100; ++q) {
    RowVector query(4);
    for (Index c = 0; c < 4; ++c) query(c) = q % 2 ? coord(gen) : std::normal_distribution<double>()(gen);
    const auto got = labelview::knn(pool, query, 50);
    const auto ref = oracle::knn_full_sort(pool.features, query, 50);
    bool tie = false;
    for (std::size_t i = 0; i < 50; ++i) {
      if (got[i].index != ref[i].first || got[i].distance != ref[i].second) ++mismatches;
      if (i > 0 && ref[i].second == ref[i - 1].second) tie = true;
    }
    tied_queries += tie;
  }
  return {mismatches == 0, "100 queries, k=50, m=1000, " + std::to_string(mismatches) + " mismatched entries, " +
                               std::to_string(tied_queries) + " queries with distance ties"};
}

// 5 -------------------------------------------------------------------------------

Outcome ap_oracle() {
  std::mt19937_64 gen(17);
  std::uniform_int_distribution<int> len(2, 80), coin(0, 3), level(0, 6);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const auto n = static_cast<std::size_t>(len(gen));
    std::vector<double> s(n);
    std::vector<std::uint8_t> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = t % 2 ? static_cast<double>(level(gen)) : std::uniform_real_distribution<double>()(gen);
      y[i] = coin(gen) == 0;
    }
    y[n / 2] = 1;
    worst = std::max(worst, std::abs(eval::average_precision(s, y).ap - oracle::ap_bruteforce(s, y)));
  }
  bool exact = true;
  for (std::size_t N : {1u, 7u, 50u, 199u}) {
    std::vector<double> s(N + 1);
    std::vector<std::uint8_t> last(N + 1, 0), perfect(N + 1, 0);
    for (std::size_t i = 0; i <= N; ++i) s[i] = -static_cast<double>(i);
    last[N] = 1;
    for (std::size_t i = 0; i <= N / 2; ++i) perfect[i] = 1;
    exact = exact && eval::average_precision(s, last).ap == 1.0 / static_cast<double>(N + 1) &&
            eval::average_precision(s, perfect).ap == 1.0;
  }
  return {worst <= 1e-12 && exact, "200 vectors, max |diff| " + fmt("%.2e", worst) +
                                       " (limit 1e-12), degenerate cases " + (exact ? "exact" : "NOT exact")};
}

// 6, 7 ----------------------------------------------------------------------------

synth::SynthConfig directional_synth(std::uint64_t seed) {
  synth::SynthConfig cfg;
  cfg.seed = seed;
  cfg.num_classes = 6;
  cfg.feature_dim = 32;
  cfg.num_bags = 300;
  cfg.instances_min = 20;
  cfg.instances_max = 60;
  cfg.background_fraction = 0.5;
  cfg.labels_min = 1;
  cfg.labels_max = 3;
  cfg.exemplars_per_class = 60;
  return cfg;
}

pipeline::PipelineConfig directional_pipeline(pipeline::Mode mode, std::uint64_t seed) {
  pipeline::PipelineConfig cfg;
  cfg.mode = mode;
  cfg.components = 16;
  cfg.k = 10;
  cfg.d_out = 16;
  cfg.seed = seed;
  cfg.classifier.seed = seed;
  return cfg;
}

double test_map(const Dataset& train, const ExemplarSet* pool, const Dataset& test, pipeline::Mode mode,
                std::uint64_t seed) {
  const auto bundle = pipeline::run_train(train, pool, directional_pipeline(mode, seed));
  return 100.0 * pipeline::run_eval(pipeline::run_predict(bundle, test), test, eval::ApMode::all_points).map;
}

struct DirectionalRuns {
  std::vector<double> fev, fev_lv, partial;
  double main_seconds = 0.0;
  double partial_seconds = 0.0;
};

DirectionalRuns directional_runs() {
  DirectionalRuns runs;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto cfg = directional_synth(seed);
    const auto train = synth::generate(cfg);
    auto test_cfg = cfg;
    test_cfg.seed = 5000 + seed;
    test_cfg.num_bags = 200;
    test_cfg.id_prefix = "test";
    const auto test = synth::generate(test_cfg).bags;

    auto start = std::chrono::steady_clock::now();
    runs.fev.push_back(test_map(train.bags, nullptr, test, pipeline::Mode::fev, seed));
    runs.fev_lv.push_back(test_map(train.bags, &train.exemplars, test, pipeline::Mode::fev_lv, seed));
    runs.main_seconds += seconds_since(start);

    start = std::chrono::steady_clock::now();
    const auto partial_pool = train.exemplars.restricted_to({0, 1, 2});
    runs.partial.push_back(test_map(train.bags, &partial_pool, test, pipeline::Mode::fev_lv, seed));
    runs.partial_seconds += seconds_since(start);
  }
  return runs;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

std::string per_seed(const std::vector<double>& v) {
  std::string out;
  for (double x : v) out += (out.empty() ? "" : " ") + fmt("%.2f", x);
  return out;
}

// 8 -------------------------------------------------------------------------------

Outcome cli_determinism() {
  const auto dir = oracle::scratch_dir("acceptance_determinism");
  const std::string d = dir.string() + "/";
  auto run = [&](const std::string& args) {
    return std::system((std::string(MILV_CLI) + " " + args + " > " + d + "cli.log 2>&1").c_str()) == 0;
  };
  io::write_file(dir / "pipeline.cfg",
                 "# pipeline settings shared by every run\nmode=fev+lv\ncomponents=16\nk=10\nd-out=16\nlambdas=1,0.5\n"
                 "seed=9\nquiet=true\n");
  if (!run("synth --seed 21 --bags 120 --labels-max 3 --out " + d + "train.milb --pool-out " + d +
           "pool.milp --test-out " + d + "test.milb --test-bags 60"))
    return {false, "synth failed: " + oracle::slurp(dir / "cli.log")};
  const std::vector<std::string> threads{"1", "1", "4"};
  std::vector<std::string> outputs;
  for (std::size_t r = 0; r < threads.size(); ++r) {
    const std::string out = d + "run" + std::to_string(r);
    if (!run("pipeline --config " + d + "pipeline.cfg --train " + d + "train.milb --test " + d + "test.milb --pool " +
             d + "pool.milp --threads " + threads[r] + " --out " + out))
      return {false, "pipeline run " + std::to_string(r) + " failed: " + oracle::slurp(dir / "cli.log")};
    std::string all;
    for (const char* f : {"bundle/bundle.txt", "bundle/pca.mila", "bundle/gmm.milg", "bundle/classifier.milc",
                          "bundle/metric.milw", "bundle/pool.milq", "scores.csv"})
      all += std::string(f) + "\n" + oracle::slurp(fs::path(out) / f);
    outputs.push_back(all);
  }
  const bool same_threads = outputs[0] == outputs[1];
  const bool across_threads = outputs[0] == outputs[2];
  return {same_threads && across_threads,
          std::string("bundle + scores.csv byte-identical: repeat run ") + (same_threads ? "yes" : "NO") +
              ", --threads 1 vs 4 " + (across_threads ? "yes" : "NO")};
}

// 9 -------------------------------------------------------------------------------

Outcome square_loss_values() {
  Matrix p(1, 3), q(1, 3);
  p << 0.5, 0.5, 0.0;
  q << 0.0, 0.0, 1.0;
  const double same = classifier::square_loss(p, p);
  const double example = classifier::square_loss(q, p);
  return {same == 0.0 && example == 1.5,
          "loss(p, p) = " + format_double(same) + ", loss([0,0,1], [0.5,0.5,0]) = " + format_double(example)};
}

}  // namespace

int main() {
  set_num_threads(0);
  int failures = 0;
  auto report = [&](int id, const std::string& name, const Outcome& o) {
    std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << id << "] " << name << ": " << o.detail << std::endl;
    failures += !o.pass;
  };
  auto guarded = [](const std::function<Outcome()>& fn) {
    try {
      return fn();
    } catch (const std::exception& e) {
      return Outcome{false, std::string("exception: ") + e.what()};
    }
  };

  report(1, "LMNN gradient check", guarded(lmnn_gradient_check));
  report(2, "EM monotonicity", guarded(em_monotonicity));
  report(3, "Fisher oracle equivalence", guarded(fisher_oracle));
  report(4, "kNN exactness", guarded(knn_exactness));
  report(5, "AP oracle", guarded(ap_oracle));

  DirectionalRuns runs;
  std::string run_error;
  try {
    runs = directional_runs();
  } catch (const std::exception& e) {
    run_error = e.what();
  }
  if (!run_error.empty()) {
    report(6, "Directional label-view gain", {false, "exception: " + run_error});
    report(7, "Partial-pool generalization", {false, "exception: " + run_error});
  } else {
    const double gain = mean(runs.fev_lv) - mean(runs.fev);
    report(6, "Directional label-view gain",
           {gain >= 2.0 && runs.main_seconds < 300.0,
            "mean test mAP fev " + fmt("%.2f", mean(runs.fev)) + " [" + per_seed(runs.fev) + "], fev+lv " +
                fmt("%.2f", mean(runs.fev_lv)) + " [" + per_seed(runs.fev_lv) + "], gain " + fmt("%+.2f", gain) +
                " points (need >= +2.00), " + fmt("%.1f", runs.main_seconds) + "s (limit 300s)"});
    report(7, "Partial-pool generalization",
           {mean(runs.partial) >= mean(runs.fev),
            "mean test mAP fev+lv with pool classes {0,1,2} " + fmt("%.2f", mean(runs.partial)) + " [" +
                per_seed(runs.partial) + "] vs fev " + fmt("%.2f", mean(runs.fev)) + ", " +
                fmt("%.1f", runs.partial_seconds) + "s"});
  }

  report(8, "Determinism", guarded(cli_determinism));
  report(9, "Square-loss unit values", guarded(square_loss_values));

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
