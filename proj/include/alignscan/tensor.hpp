#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace alignscan {

/// Row-major batch x token x channel tensor of doubles.
///
/// This is the carrier for layer inputs, projected sequences and scan
/// outputs. Tokens of one batch item are contiguous, so a batch slice can be
/// viewed as a (tokens x channels) row-major matrix.
class TokenTensor {
 public:
  TokenTensor() = default;
  TokenTensor(std::size_t batch, std::size_t tokens, std::size_t channels,
              double fill = 0.0);
  TokenTensor(std::size_t batch, std::size_t tokens, std::size_t channels,
              std::vector<double> values);

  std::size_t batch() const { return batch_; }
  std::size_t tokens() const { return tokens_; }
  std::size_t channels() const { return channels_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double& at(std::size_t b, std::size_t t, std::size_t c) {
    return values_[index(b, t, c)];
  }
  double at(std::size_t b, std::size_t t, std::size_t c) const {
    return values_[index(b, t, c)];
  }

  std::span<double> token(std::size_t b, std::size_t t) {
    return {values_.data() + index(b, t, 0), channels_};
  }
  std::span<const double> token(std::size_t b, std::size_t t) const {
    return {values_.data() + index(b, t, 0), channels_};
  }

  /// All tokens of batch item `b`, tokens() * channels() values.
  std::span<double> slice(std::size_t b) {
    return {values_.data() + b * tokens_ * channels_, tokens_ * channels_};
  }
  std::span<const double> slice(std::size_t b) const {
    return {values_.data() + b * tokens_ * channels_, tokens_ * channels_};
  }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  bool same_shape(const TokenTensor& other) const {
    return batch_ == other.batch_ && tokens_ == other.tokens_ &&
           channels_ == other.channels_;
  }

  friend bool operator==(const TokenTensor&, const TokenTensor&) = default;

 private:
  std::size_t index(std::size_t b, std::size_t t, std::size_t c) const {
    return (b * tokens_ + t) * channels_ + c;
  }

  std::size_t batch_ = 0;
  std::size_t tokens_ = 0;
  std::size_t channels_ = 0;
  std::vector<double> values_;
};

/// Largest elementwise |a - b|. Throws StructuralError on shape mismatch.
double max_abs_diff(const TokenTensor& a, const TokenTensor& b);

/// Copy of batch item `b` as a batch-1 tensor.
TokenTensor batch_item(const TokenTensor& x, std::size_t b);

}  // namespace alignscan
