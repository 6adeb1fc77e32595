#include "evidentia/array.hpp"

#include <cmath>

namespace evidentia {

bool Array::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

void narrow_storage(Array& a, Precision p) {
  if (p == Precision::f64) return;
  for (auto& v : a.data) v = static_cast<double>(static_cast<float>(v));
}

uint64_t derive_seed(uint64_t master, uint64_t index) {
  uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace evidentia
