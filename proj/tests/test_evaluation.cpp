#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "evidentia/evaluation.hpp"

#include "helpers.hpp"

using namespace evidentia;

namespace {

QuestionGroup group4(const std::string& id, int base, int positive, const std::string& cls = "") {
  QuestionGroup g;
  g.id = id;
  g.members = {base, base + 1, base + 2, base + 3};
  g.positive = positive;
  g.cls = cls;
  return g;
}

}  // namespace

TEST_CASE("binary accuracy with the 0.5-counts-as-positive rule") {
  CHECK(accuracy_binary({0.9, 0.1}, {1, 0}) == doctest::Approx(1.0));
  CHECK(accuracy_binary({0.1, 0.9}, {1, 0}) == doctest::Approx(0.0));
  CHECK(accuracy_binary({0.5}, {1}) == doctest::Approx(1.0));
  CHECK(accuracy_binary({0.5}, {0}) == doctest::Approx(0.0));
  CHECK_THROWS_AS(accuracy_binary({}, {}), ValidationError);
}

TEST_CASE("multiple-choice accuracy and the argmax tie rule") {
  auto g = group4("g", 0, 2);
  CHECK(accuracy_mc({g}, {0.1, 0.2, 0.9, 0.3}) == doctest::Approx(1.0));

  // all-equal predictions: argmax resolves to index 0
  auto g0 = group4("g0", 0, 0);
  CHECK(accuracy_mc({g0}, {0.5, 0.5, 0.5, 0.5}) == doctest::Approx(1.0));
  auto g1 = group4("g1", 0, 1);
  CHECK(accuracy_mc({g1}, {0.5, 0.5, 0.5, 0.5}) == doctest::Approx(0.0));
}

TEST_CASE("three-group case recounted by hand") {
  std::vector<QuestionGroup> groups = {group4("a", 0, 1), group4("b", 4, 0), group4("c", 8, 3)};
  std::vector<double> y = {0.2, 0.8, 0.1, 0.0,    // correct (argmax 1)
                           0.3, 0.9, 0.2, 0.1,    // wrong (argmax 1, gold 0)
                           0.5, 0.6, 0.65, 0.64}; // wrong (argmax 2, gold 3)
  CHECK(accuracy_mc(groups, y) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("mc accuracy is invariant under monotone transforms") {
  Rng rng(51);
  std::vector<QuestionGroup> groups = {group4("a", 0, 2), group4("b", 4, 0)};
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> y;
    for (int i = 0; i < 8; ++i) y.push_back(rng.uniform(0.01, 0.99));
    double base = accuracy_mc(groups, y);
    std::vector<double> squashed, scaled;
    for (double v : y) {
      squashed.push_back(1.0 / (1.0 + std::exp(-5.0 * v)));
      scaled.push_back(0.2 + 0.5 * v);
    }
    CHECK(accuracy_mc(groups, squashed) == base);
    CHECK(accuracy_mc(groups, scaled) == base);
  }
}

TEST_CASE("t quantiles match the published table") {
  CHECK(t_quantile_975(1) == doctest::Approx(12.706).epsilon(1e-4));
  CHECK(t_quantile_975(15) == doctest::Approx(2.131).epsilon(1e-3));
  CHECK(t_quantile_975(63) == doctest::Approx(1.998).epsilon(1e-3));
  CHECK_THROWS_AS(t_quantile_975(0), ValidationError);
  CHECK_THROWS_AS(t_quantile_975(64), ValidationError);
}

TEST_CASE("zero-variance runs give a zero half-width") {
  RunStatistics s = summarize_runs(std::vector<double>(16, 0.8));
  CHECK(s.mean == doctest::Approx(0.8));
  CHECK(s.half_width == doctest::Approx(0.0));
}

TEST_CASE("the 0.800 +- 0.055 case") {
  std::vector<double> accs;
  for (int i = 0; i < 8; ++i) accs.push_back(0.7);
  for (int i = 0; i < 8; ++i) accs.push_back(0.9);
  RunStatistics s = summarize_runs(accs);
  CHECK(s.mean == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(std::abs(s.stddev - 0.1032795558988645) <= 1e-9);
  CHECK(std::abs(s.half_width - 0.055034) <= 1e-3);
}

TEST_CASE("n=2 uses t(0.975,1)=12.706") {
  RunStatistics s = summarize_runs({0.5, 0.7});
  CHECK(s.mean == doctest::Approx(0.6));
  CHECK(std::abs(s.half_width - 1.270620) <= 1e-3);
}

TEST_CASE("pearson correlation hand cases") {
  std::vector<double> c = {0.1, 0.4, 0.7, 0.9};
  std::vector<double> r = c;
  CHECK(*pearson(c, r) == doctest::Approx(1.0).epsilon(1e-12));

  std::vector<double> neg;
  for (double v : c) neg.push_back(1.0 - v);
  CHECK(*pearson(c, neg) == doctest::Approx(-1.0).epsilon(1e-12));

  // {(0,0),(1,1),(2,0)}: covariance is exactly zero
  CHECK(*pearson({0, 1, 2}, {0, 1, 0}) == doctest::Approx(0.0));

  CHECK(!pearson({1, 1, 1}, {0, 1, 2}).has_value());  // zero variance: undefined
  CHECK(!pearson({1}, {1}).has_value());
}

TEST_CASE("multi_run on the toy task is reproducible and aggregates classes") {
  // config pointing at the bundled synthetic fixture
  ExperimentConfig cfg;
  cfg.task = Task::argus;
  cfg.data_dir = testutil::data_dir() + "/synthetic_argus";
  cfg.model = testutil::small_model(EncoderKind::avg, IntegrationScheme::weighed);
  cfg.train.epochs = 2;
  cfg.train.patience = 2;
  cfg.train.batch_size = 4;
  cfg.runs = 2;
  cfg.seed = 99;

  MultiRunResult a = multi_run(cfg, 2, 1);
  MultiRunResult b = multi_run(cfg, 2, 2);  // same result regardless of jobs
  REQUIRE(a.by_class.count("all"));
  CHECK(a.by_class.at("all").accuracies == b.by_class.at("all").accuracies);
  CHECK(a.run_seeds == b.run_seeds);
  CHECK(a.by_class.at("all").accuracies.size() == 2);
  CHECK(std::isfinite(a.by_class.at("all").half_width));

  std::string csv = results_csv("avg", "argus", "test", a);
  CHECK(csv.find("model,dataset,split,class,mean,ci95,n") == 0);
  CHECK(csv.find("avg,argus,test,all,") != std::string::npos);

  CHECK_THROWS_AS(multi_run(cfg, 1, 1), ValidationError);
}

TEST_CASE("score diagnostics expose per-evidence pairs and their correlation") {
  Split split = testutil::toy_overlap_split(6);
  ModelConfig mc = testutil::small_model(EncoderKind::avg, IntegrationScheme::weighed);
  Vocabulary vocab = testutil::toy_vocab(split, mc.adaptable_k, mc.embed_dim);
  Model model(mc, vocab, 3);
  PreparedSplit prep = prepare_split(split, vocab, mc);

  ScoreDiagnostics d = collect_score_diagnostics(model, prep);
  CHECK(d.pairs.size() == 12);  // 6 instances x 2 evidences
  for (const auto& p : d.pairs) {
    CHECK(p.entailment >= 0.0);
    CHECK(p.entailment <= 1.0);
    CHECK(p.relevance >= 0.0);
    CHECK(p.relevance <= 1.0);
  }
  CHECK(d.pearson_r.has_value());
}
