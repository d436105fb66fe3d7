#include "alignscan/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "alignscan/error.hpp"

namespace alignscan {

TokenTensor::TokenTensor(std::size_t batch, std::size_t tokens,
                         std::size_t channels, double fill)
    : batch_(batch),
      tokens_(tokens),
      channels_(channels),
      values_(batch * tokens * channels, fill) {}

TokenTensor::TokenTensor(std::size_t batch, std::size_t tokens,
                         std::size_t channels, std::vector<double> values)
    : batch_(batch),
      tokens_(tokens),
      channels_(channels),
      values_(std::move(values)) {
  if (values_.size() != batch * tokens * channels) {
    throw StructuralError("TokenTensor: " + std::to_string(values_.size()) +
                          " values for shape " + std::to_string(batch) + "x" +
                          std::to_string(tokens) + "x" +
                          std::to_string(channels));
  }
}

double max_abs_diff(const TokenTensor& a, const TokenTensor& b) {
  if (!a.same_shape(b)) {
    throw StructuralError("max_abs_diff: shape mismatch");
  }
  double worst = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) {
    worst = std::max(worst, std::abs(av[i] - bv[i]));
  }
  return worst;
}

TokenTensor batch_item(const TokenTensor& x, std::size_t b) {
  if (b >= x.batch()) {
    throw StructuralError("batch_item: index out of range");
  }
  auto s = x.slice(b);
  return TokenTensor(1, x.tokens(), x.channels(),
                     std::vector<double>(s.begin(), s.end()));
}

}  // namespace alignscan
