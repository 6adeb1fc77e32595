#include "evidentia/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "evidentia/config.hpp"
#include "evidentia/evaluation.hpp"

namespace evidentia {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ValidationError("train: learning_rate must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
    throw ValidationError("train: Adam betas must lie in (0,1)");
  if (!(adam_epsilon > 0.0)) throw ValidationError("train: adam_epsilon must be positive");
  if (l2 < 0.0) throw ValidationError("train: l2 must be >= 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("train: dropout must lie in [0,1)");
  if (batch_size < 1) throw ValidationError("train: batch_size must be positive");
  if (epochs < 1) throw ValidationError("train: epochs must be positive");
  if (patience < 1) throw ValidationError("train: patience must be positive");
}

double bce_loss(double y, int label) {
  double yc = std::clamp(y, 1e-7, 1.0 - 1e-7);
  return -static_cast<double>(label) * std::log(yc) -
         (1.0 - static_cast<double>(label)) * std::log(1.0 - yc);
}

void adam_step(ParameterStore& params, const GradientMap& grads, AdamState& state,
               const TrainConfig& cfg) {
  const long t = ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));

  for (const auto& [name, grad] : grads) {
    Array& p = params.mutable_value(name);
    if (!p.same_shape(grad))
      throw ValidationError("adam_step: gradient shape mismatch for parameter " + name);
    const bool decay = params.decays(name);

    Array& m = state.m[name];
    Array& v = state.v[name];
    if (m.rows == 0) m = Array::zeros(p.rows, p.cols);
    if (v.rows == 0) v = Array::zeros(p.rows, p.cols);

    for (size_t k = 0; k < p.size(); ++k) {
      double g = grad.data[k] + (decay ? cfg.l2 * p.data[k] : 0.0);
      m.data[k] = cfg.beta1 * m.data[k] + (1.0 - cfg.beta1) * g;
      v.data[k] = cfg.beta2 * v.data[k] + (1.0 - cfg.beta2) * g * g;
      double mh = m.data[k] / bc1;
      double vh = v.data[k] / bc2;
      p.data[k] -= cfg.learning_rate * mh / (std::sqrt(vh) + cfg.adam_epsilon);
    }
    narrow_storage(p, cfg.precision);
  }
}

TrainResult train(Model& model, const PreparedSplit& train_set, const PreparedSplit& val_set,
                  const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.instances.empty()) throw ValidationError("train: empty training set");

  Rng rng(derive_seed(cfg.seed, 0x7121ULL));
  AdamState state;
  Execution exec;
  TrainResult res;
  ParameterStore best_params = model.params();
  int epochs_since_best = 0;

  const Bm25Context* train_bm25 = train_set.bm25 ? &*train_set.bm25 : nullptr;
  const size_t n = train_set.instances.size();

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::shuffle(order.begin(), order.end(), rng.engine());

    double loss_sum = 0.0;
    long correct = 0;

    for (size_t start = 0; start < n; start += cfg.batch_size) {
      const size_t end = std::min(n, start + cfg.batch_size);
      GradientMap accum;

      for (size_t k = start; k < end; ++k) {
        const TokenizedInstance& inst = train_set.instances[order[k]];
        const int slots = model.evidence_slots(inst.evidence.size());
        const int pad = model.pad_length(inst);
        const Model::InstanceGraph& ig = model.instance_graph(slots, pad, true);
        Bindings b =
            model.make_bindings(inst, slots, pad, true, &rng, train_bm25, cfg.dropout);

        exec.forward(ig.graph, model.params(), b, cfg.precision);
        const double loss = exec.value(ig.loss).data[0];
        if (!std::isfinite(loss))
          throw ComputeError("training diverged: non-finite loss at epoch " +
                             std::to_string(epoch) + ", instance " + std::to_string(order[k]));
        loss_sum += loss;
        const double y = exec.value(ig.y).data[0];
        correct += ((y >= 0.5) ? 1 : 0) == inst.label;

        exec.backward(ig.graph, ig.loss);
        for (const auto& [name, id] : ig.graph.params()) {
          const Array& g = exec.gradient(id);
          if (g.rows == 0) continue;
          Array& acc = accum[name];
          if (acc.rows == 0) {
            acc = g;
          } else {
            for (size_t i = 0; i < acc.size(); ++i) acc.data[i] += g.data[i];
          }
        }
      }

      const double inv = 1.0 / static_cast<double>(end - start);
      for (auto& [name, g] : accum)
        for (auto& v : g.data) v *= inv;
      adam_step(model.params(), accum, state, cfg);
    }

    const double val_acc =
        val_set.instances.empty() ? 0.0 : evaluate_split(model, val_set).accuracy;
    res.log.push_back({epoch, loss_sum / static_cast<double>(n),
                       static_cast<double>(correct) / static_cast<double>(n), val_acc});

    if (res.best_epoch < 0 || val_acc > res.best_val_acc) {
      res.best_epoch = epoch;
      res.best_val_acc = val_acc;
      best_params = model.params();
      epochs_since_best = 0;
    } else if (++epochs_since_best >= cfg.patience) {
      break;
    }
  }

  model.params() = best_params;
  return res;
}

// ---------------------------------------------------------------------------
// checkpoints

namespace {

nlohmann::ordered_json params_to_json(const ParameterStore& store) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [name, entry] : store.entries()) {
    nlohmann::ordered_json e;
    e["rows"] = entry.value.rows;
    e["cols"] = entry.value.cols;
    e["decay"] = entry.decay;
    e["data"] = entry.value.data;
    j[name] = std::move(e);
  }
  return j;
}

ParameterStore params_from_json(const nlohmann::json& j) {
  ParameterStore store;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& e = it.value();
    Array a(e.at("rows").get<int>(), e.at("cols").get<int>());
    auto data = e.at("data").get<std::vector<double>>();
    if (data.size() != a.size())
      throw ValidationError("checkpoint: data length mismatch for parameter " + it.key());
    a.data = std::move(data);
    store.add(it.key(), std::move(a), e.at("decay").get<bool>());
  }
  return store;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  nlohmann::ordered_json j;
  j["format"] = "evidentia-checkpoint";
  j["version"] = 1;
  j["model"] = model_config_to_json(ck.model_config);
  j["train"] = train_config_to_json(ck.train_config);
  j["best_epoch"] = ck.best_epoch;
  j["best_val_acc"] = ck.best_val_acc;
  j["vocab"] = nlohmann::ordered_json::parse(ck.vocab.to_json());
  j["params"] = params_to_json(ck.params);

  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write checkpoint: " + path);
  out << j.dump() << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open checkpoint: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ValidationError("checkpoint " + path + ": invalid JSON: " + e.what());
  }
  if (j.value("format", "") != "evidentia-checkpoint")
    throw ValidationError("checkpoint " + path + ": unrecognized format field");
  if (j.value("version", 0) != 1)
    throw ValidationError("checkpoint " + path + ": unsupported version");

  Checkpoint ck;
  ck.model_config = model_config_from_json(j.at("model"));
  ck.train_config = train_config_from_json(j.at("train"));
  ck.best_epoch = j.at("best_epoch").get<int>();
  ck.best_val_acc = j.at("best_val_acc").get<double>();
  ck.vocab = Vocabulary::from_json(j.at("vocab").dump());
  ck.params = params_from_json(j.at("params"));
  return ck;
}

Model model_from_checkpoint(const Checkpoint& ck) {
  Model m(ck.model_config, ck.vocab, /*init_seed=*/0);
  for (const auto& [name, entry] : ck.params.entries()) {
    if (!m.params().has(name))
      throw ValidationError("checkpoint parameter " + name + " does not fit the model config");
    Array& dst = m.params().mutable_value(name);
    if (!dst.same_shape(entry.value))
      throw ValidationError("checkpoint parameter " + name + " has an unexpected shape");
    dst = entry.value;
  }
  return m;
}

TrainResult finetune(Model& model, const Checkpoint& source, const PreparedSplit& train_set,
                     const PreparedSplit& val_set, const TrainConfig& cfg) {
  std::vector<std::string> mismatched;
  for (const auto& [name, entry] : model.params().entries()) {
    const bool imported = name.rfind("emb.", 0) == 0 || name.rfind("enc.", 0) == 0;
    if (!imported) continue;
    if (!source.params.has(name)) {
      mismatched.push_back(name + " (missing from checkpoint)");
      continue;
    }
    const Array& src = source.params.get(name);
    if (!entry.value.same_shape(src)) {
      mismatched.push_back(name + " (checkpoint [" + std::to_string(src.rows) + "," +
                           std::to_string(src.cols) + "], model [" +
                           std::to_string(entry.value.rows) + "," +
                           std::to_string(entry.value.cols) + "])");
    }
  }
  if (!mismatched.empty()) {
    std::ostringstream msg;
    msg << "finetune: incompatible checkpoint parameters:";
    for (const auto& m : mismatched) msg << " " << m << ";";
    throw ValidationError(msg.str());
  }

  for (auto& [name, entry] : model.params().entries()) {
    if (name.rfind("emb.", 0) == 0 || name.rfind("enc.", 0) == 0)
      entry.value = source.params.get(name);
  }
  model.reinit_scorers(cfg.seed);
  return train(model, train_set, val_set, cfg);
}

}  // namespace evidentia
