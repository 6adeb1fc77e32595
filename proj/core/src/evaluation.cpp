#include "evidentia/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "evidentia/textio.hpp"
#include "evidentia/training.hpp"

namespace evidentia {

double accuracy_binary(const std::vector<double>& predictions, const std::vector<int>& labels) {
  if (predictions.empty()) throw ValidationError("accuracy_binary: empty prediction list");
  if (predictions.size() != labels.size())
    throw ValidationError("accuracy_binary: prediction/label length mismatch");
  long correct = 0;
  for (size_t i = 0; i < predictions.size(); ++i)
    correct += ((predictions[i] >= 0.5) ? 1 : 0) == labels[i];
  return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

double accuracy_mc(const std::vector<QuestionGroup>& groups,
                   const std::vector<double>& predictions) {
  if (groups.empty()) throw ValidationError("accuracy_mc: no question groups");
  long correct = 0;
  for (const auto& g : groups) {
    if (g.members.size() != 4 || g.positive < 0)
      throw ValidationError("accuracy_mc: malformed group " + g.id);
    int arg = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < 4; ++k) {
      const int idx = g.members[k];
      if (idx < 0 || idx >= static_cast<int>(predictions.size()))
        throw ValidationError("accuracy_mc: group " + g.id + " references a missing prediction");
      if (predictions[idx] > best) {  // ties keep the lowest index
        best = predictions[idx];
        arg = k;
      }
    }
    correct += arg == g.positive;
  }
  return static_cast<double>(correct) / static_cast<double>(groups.size());
}

double t_quantile_975(int df) {
  // two-sided 95% quantiles, df 1..63
  static const double table[63] = {
      12.7062047364, 4.3026527297, 3.1824463053, 2.7764451052, 2.5705818356, 2.4469118511,
      2.3646242516,  2.3060041352, 2.2621571629, 2.2281388520, 2.2009851601, 2.1788128297,
      2.1603686565,  2.1447866879, 2.1314495456, 2.1199052992, 2.1098155778, 2.1009220402,
      2.0930240544,  2.0859634473, 2.0796138447, 2.0738730679, 2.0686576104, 2.0638985616,
      2.0595385528,  2.0555294386, 2.0518305165, 2.0484071418, 2.0452296421, 2.0422724563,
      2.0395134464,  2.0369333435, 2.0345152974, 2.0322445093, 2.0301079283, 2.0280940010,
      2.0261924630,  2.0243941639, 2.0226909200, 2.0210753903, 2.0195409704, 2.0180817028,
      2.0166921992,  2.0153675744, 2.0141033889, 2.0128955989, 2.0117405137, 2.0106347576,
      2.0095752371,  2.0085591121, 2.0075837703, 2.0066468051, 2.0057459953, 2.0048792882,
      2.0040447833,  2.0032407188, 2.0024654593, 2.0017174841, 2.0009953781, 2.0002978220,
      1.9996235850,  1.9989715170, 1.9983405425};
  if (df < 1 || df > 63)
    throw ValidationError("t_quantile_975: df must lie in [1, 63], got " + std::to_string(df));
  return table[df - 1];
}

RunStatistics summarize_runs(std::vector<double> accuracies) {
  RunStatistics s;
  s.accuracies = std::move(accuracies);
  const size_t n = s.accuracies.size();
  if (n == 0) throw ValidationError("summarize_runs: no accuracies");
  double sum = 0.0;
  for (double a : s.accuracies) sum += a;
  s.mean = sum / static_cast<double>(n);
  if (n < 2) {
    s.stddev = 0.0;
    s.half_width = std::numeric_limits<double>::infinity();
    return s;
  }
  double ss = 0.0;
  for (double a : s.accuracies) ss += (a - s.mean) * (a - s.mean);
  s.stddev = std::sqrt(ss / static_cast<double>(n - 1));
  s.half_width =
      t_quantile_975(static_cast<int>(n) - 1) * s.stddev / std::sqrt(static_cast<double>(n));
  return s;
}

std::optional<double> pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ValidationError("pearson: length mismatch");
  const size_t n = a.size();
  if (n < 2) return std::nullopt;
  double ma = 0.0, mb = 0.0;
  for (size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (size_t i = 0; i < n; ++i) {
    cov += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  if (va == 0.0 || vb == 0.0) return std::nullopt;
  return cov / std::sqrt(va * vb);
}

EvalOutcome evaluate_split(Model& model, const PreparedSplit& split) {
  if (split.instances.empty()) throw ValidationError("evaluate_split: empty split");
  const Bm25Context* bm25 = split.bm25 ? &*split.bm25 : nullptr;

  EvalOutcome out;
  out.predictions.reserve(split.instances.size());
  for (const auto& inst : split.instances)
    out.predictions.push_back(model.predict(inst, bm25).y);

  if (split.groups.empty()) {
    std::vector<int> labels;
    labels.reserve(split.instances.size());
    for (const auto& inst : split.instances) labels.push_back(inst.label);
    out.accuracy = accuracy_binary(out.predictions, labels);
    out.by_class["all"] = out.accuracy;
    return out;
  }

  out.accuracy = accuracy_mc(split.groups, out.predictions);
  out.by_class["all"] = out.accuracy;
  std::map<std::string, std::vector<QuestionGroup>> by_cls;
  for (const auto& g : split.groups)
    if (!g.cls.empty()) by_cls[g.cls].push_back(g);
  for (const auto& [cls, groups] : by_cls) out.by_class[cls] = accuracy_mc(groups, out.predictions);
  return out;
}

// ---------------------------------------------------------------------------
// multi-run protocol

namespace {

struct RunInputs {
  Vocabulary vocab;
  PreparedSplit train, val, test;
};

RunInputs prepare_experiment(const ExperimentConfig& cfg) {
  Dataset data = load_dataset(cfg.data_dir, cfg.task);

  std::unordered_map<std::string, std::vector<double>> pretrained;
  if (!cfg.pretrained_vectors.empty())
    pretrained = load_pretrained(cfg.pretrained_vectors, cfg.model.embed_dim);

  std::vector<std::vector<std::string>> train_tokens, extra_tokens;
  auto collect = [](const Split& s, std::vector<std::vector<std::string>>& into) {
    for (const auto& inst : s.instances) {
      into.push_back(tokenize(inst.hypothesis));
      for (const auto& e : inst.evidence) into.push_back(tokenize(e));
    }
  };
  collect(data.train, train_tokens);
  collect(data.val, extra_tokens);
  collect(data.test, extra_tokens);

  RunInputs in;
  in.vocab = Vocabulary::build(train_tokens, cfg.model.adaptable_k, pretrained,
                               cfg.model.embed_dim, extra_tokens);
  in.train = prepare_split(data.train, in.vocab, cfg.model);
  in.val = prepare_split(data.val, in.vocab, cfg.model);
  in.test = prepare_split(data.test, in.vocab, cfg.model);
  return in;
}

}  // namespace

MultiRunResult multi_run(const ExperimentConfig& cfg, int n, int jobs) {
  if (n < 2) throw ValidationError("multi_run: need at least 2 runs");
  if (jobs < 1) jobs = 1;

  const RunInputs inputs = prepare_experiment(cfg);  // shared, immutable

  MultiRunResult result;
  result.per_run.resize(n);
  result.run_seeds.resize(n);
  std::vector<std::string> errors(n);

  std::atomic<int> next{0};
  auto worker = [&] {
    for (int r = next.fetch_add(1); r < n; r = next.fetch_add(1)) {
      const uint64_t seed = derive_seed(cfg.seed, static_cast<uint64_t>(r));
      result.run_seeds[r] = seed;
      try {
        Model model(cfg.model, inputs.vocab, seed);
        TrainConfig tc = cfg.train;
        tc.seed = seed;
        train(model, inputs.train, inputs.val, tc);
        result.per_run[r] = evaluate_split(model, inputs.test).by_class;
      } catch (const std::exception& e) {
        errors[r] = e.what();
      }
    }
  };

  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < std::min(jobs, n); ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::map<std::string, std::vector<double>> collected;
  for (int r = 0; r < n; ++r) {
    if (!errors[r].empty()) {
      result.warnings.push_back("run " + std::to_string(r) + " aborted: " + errors[r]);
      continue;
    }
    for (const auto& [cls, acc] : result.per_run[r]) collected[cls].push_back(acc);
  }
  if (collected.empty()) throw ComputeError("multi_run: every run aborted");
  for (auto& [cls, accs] : collected) result.by_class[cls] = summarize_runs(accs);
  return result;
}

ScoreDiagnostics collect_score_diagnostics(Model& model, const PreparedSplit& split) {
  if (model.config().scheme != IntegrationScheme::weighed)
    throw ValidationError("score diagnostics need the weighed scheme (C and R heads)");
  ScoreDiagnostics d;
  const Bm25Context* bm25 = split.bm25 ? &*split.bm25 : nullptr;
  for (const auto& inst : split.instances) {
    auto pred = model.predict(inst, bm25);
    d.pairs.insert(d.pairs.end(), pred.pairs.begin(), pred.pairs.end());
  }
  std::vector<double> c, r;
  for (const auto& p : d.pairs) {
    c.push_back(p.entailment);
    r.push_back(p.relevance);
  }
  d.pearson_r = pearson(c, r);
  return d;
}

std::string results_csv(const std::string& model_name, const std::string& dataset,
                        const std::string& split, const MultiRunResult& result) {
  std::ostringstream out;
  out << "model,dataset,split,class,mean,ci95,n\n";
  out << std::fixed << std::setprecision(6);
  for (const auto& [cls, stats] : result.by_class) {
    out << model_name << ',' << dataset << ',' << split << ',' << cls << ',' << stats.mean << ','
        << stats.half_width << ',' << stats.accuracies.size() << "\n";
  }
  return out.str();
}

}  // namespace evidentia
