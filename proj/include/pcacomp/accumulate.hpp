#ifndef PCACOMP_ACCUMULATE_HPP
#define PCACOMP_ACCUMULATE_HPP

#include <cmath>
#include <cstddef>

namespace pcacomp {

/// Neumaier-compensated running sum. Order-dependent only in the last bits,
/// and every caller feeds it in a fixed order.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      carry_ += (sum_ - t) + x;
    else
      carry_ += (x - t) + sum_;
    sum_ = t;
  }
  void merge(const CompensatedSum& other) {
    add(other.sum_);
    add(other.carry_);
  }
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

}  // namespace pcacomp

#endif
