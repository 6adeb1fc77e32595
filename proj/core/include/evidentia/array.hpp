#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace evidentia {

// Dense row-major matrix of doubles. Vectors are [1, d], scalars [1, 1].
struct Array {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Array() = default;
  Array(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

  static Array zeros(int r, int c) { return Array(r, c); }
  static Array full(int r, int c, double v) {
    Array a(r, c);
    std::fill(a.data.begin(), a.data.end(), v);
    return a;
  }
  static Array scalar(double v) { return full(1, 1, v); }
  static Array row(std::vector<double> v) {
    Array a;
    a.rows = 1;
    a.cols = static_cast<int>(v.size());
    a.data = std::move(v);
    return a;
  }
  static Array column(const std::vector<double>& v) {
    Array a(static_cast<int>(v.size()), 1);
    a.data.assign(v.begin(), v.end());
    return a;
  }

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
  size_t size() const { return data.size(); }
  bool same_shape(const Array& o) const { return rows == o.rows && cols == o.cols; }

  void resize(int r, int c) {
    rows = r;
    cols = c;
    data.resize(static_cast<size_t>(r) * c);
  }
  void fill(double v) { std::fill(data.begin(), data.end(), v); }

  bool all_finite() const;
};

// Storage precision of forward/backward results and parameter updates.
// f32 narrows every stored value through float; arithmetic stays in double.
enum class Precision { f64, f32 };

void narrow_storage(Array& a, Precision p);

// One deterministic RNG per run; all randomness (init, shuffling, dropout
// masks, grad-check points) is drawn from instances of this.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  double uniform(double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    return d(engine_);
  }
  bool bernoulli(double p_true) {
    std::bernoulli_distribution d(p_true);
    return d(engine_);
  }
  // [0, n)
  size_t index(size_t n) {
    std::uniform_int_distribution<size_t> d(0, n - 1);
    return d(engine_);
  }
  std::mt19937_64& engine() { return engine_; }

  Array uniform_array(int r, int c, double lo, double hi) {
    Array a(r, c);
    for (auto& v : a.data) v = uniform(lo, hi);
    return a;
  }

 private:
  std::mt19937_64 engine_;
};

// Stable derivation of per-run seeds from a master seed (splitmix64 step).
uint64_t derive_seed(uint64_t master, uint64_t index);

}  // namespace evidentia
