#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace cityq {

// Queue time h : [0,1] -> [0,inf) as a function of the load on a service.
// Derivatives use the right derivative at 0 and the left derivative at 1
// and at piecewise-linear knots; eta(t) = t*h(t) follows the convention
// 0*h'(0) = 0.
class QueueFunction {
 public:
  enum class Kind { Constant, Linear, Power, PiecewiseLinear };

  static QueueFunction constant(double a) {
    if (!(a >= 0.0)) throw std::invalid_argument("queue: constant a must be >= 0");
    QueueFunction q;
    q.kind_ = Kind::Constant;
    q.a_ = a;
    return q;
  }

  // h(t) = a + b*t; b < 0 permitted as long as h stays nonnegative on [0,1].
  static QueueFunction linear(double a, double b) {
    if (!(a >= 0.0)) throw std::invalid_argument("queue: linear a must be >= 0");
    if (a + std::min(0.0, b) < 0.0)
      throw std::invalid_argument("queue: linear h is negative on [0,1]");
    QueueFunction q;
    q.kind_ = Kind::Linear;
    q.a_ = a;
    q.b_ = b;
    return q;
  }

  // h(t) = a * t^q with q in (0,1].
  static QueueFunction power(double a, double q) {
    if (!(a >= 0.0)) throw std::invalid_argument("queue: power a must be >= 0");
    if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("queue: power q must be in (0,1]");
    QueueFunction f;
    f.kind_ = Kind::Power;
    f.a_ = a;
    f.q_ = q;
    return f;
  }

  // Knots (t, value) on [0,1], first t = 0, last t = 1, strictly increasing t.
  static QueueFunction piecewise_linear(std::vector<std::pair<double, double>> knots) {
    if (knots.size() < 2) throw std::invalid_argument("queue: need at least 2 knots");
    if (knots.front().first != 0.0 || knots.back().first != 1.0)
      throw std::invalid_argument("queue: knots must span [0,1]");
    for (std::size_t i = 0; i < knots.size(); ++i) {
      if (knots[i].second < 0.0) throw std::invalid_argument("queue: negative knot value");
      if (i > 0 && !(knots[i].first > knots[i - 1].first))
        throw std::invalid_argument("queue: knot abscissae must be strictly increasing");
    }
    QueueFunction q;
    q.kind_ = Kind::PiecewiseLinear;
    q.knots_ = std::move(knots);
    q.build_prefix();
    return q;
  }

  Kind kind() const { return kind_; }
  double param_a() const { return a_; }
  double param_b() const { return b_; }
  double param_q() const { return q_; }
  const std::vector<std::pair<double, double>>& knots() const { return knots_; }

  double value(double t) const {
    check_domain(t);
    switch (kind_) {
      case Kind::Constant: return a_;
      case Kind::Linear: return a_ + b_ * t;
      case Kind::Power: return t == 0.0 ? 0.0 : a_ * std::pow(t, q_);
      case Kind::PiecewiseLinear: {
        std::size_t i = segment_ending_at(t);
        double t0 = knots_[i].first, t1 = knots_[i + 1].first;
        double v0 = knots_[i].second, v1 = knots_[i + 1].second;
        return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
      }
    }
    return 0.0;
  }

  // Left derivative at interior knots and at 1, right derivative at 0.
  double derivative(double t) const {
    check_domain(t);
    switch (kind_) {
      case Kind::Constant: return 0.0;
      case Kind::Linear: return b_;
      case Kind::Power:
        if (q_ == 1.0) return a_;
        if (t == 0.0) return a_ == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
        return a_ * q_ * std::pow(t, q_ - 1.0);
      case Kind::PiecewiseLinear: {
        std::size_t i = segment_ending_at(t);
        return (knots_[i + 1].second - knots_[i].second) /
               (knots_[i + 1].first - knots_[i].first);
      }
    }
    return 0.0;
  }

  // Integral of h over [0,t]; exact per variant.
  double integral(double t) const {
    check_domain(t);
    switch (kind_) {
      case Kind::Constant: return a_ * t;
      case Kind::Linear: return a_ * t + 0.5 * b_ * t * t;
      case Kind::Power: return t == 0.0 ? 0.0 : a_ * std::pow(t, q_ + 1.0) / (q_ + 1.0);
      case Kind::PiecewiseLinear: {
        if (t == 0.0) return 0.0;
        std::size_t i = segment_ending_at(t);
        double t0 = knots_[i].first;
        double v0 = knots_[i].second;
        double vt = value(t);
        return prefix_int_[i] + 0.5 * (v0 + vt) * (t - t0);
      }
    }
    return 0.0;
  }

  // Running average g(t) = (1/t) int_0^t h, with g(0) = h(0).
  double average(double t) const {
    check_domain(t);
    if (t == 0.0) return value(0.0);
    return integral(t) / t;
  }

  double eta(double t) const { return t * value(t); }

  // eta'(t) = h(t) + t*h'(t); at t = 0 the 0*h'(0) = 0 convention gives h(0).
  double eta_prime(double t) const {
    check_domain(t);
    if (t == 0.0) return value(0.0);
    return value(t) + t * derivative(t);
  }

  bool non_decreasing() const {
    switch (kind_) {
      case Kind::Constant: return true;
      case Kind::Linear: return b_ >= 0.0;
      case Kind::Power: return true;
      case Kind::PiecewiseLinear:
        for (std::size_t i = 1; i < knots_.size(); ++i)
          if (knots_[i].second < knots_[i - 1].second) return false;
        return true;
    }
    return false;
  }

  bool strictly_increasing() const {
    switch (kind_) {
      case Kind::Constant: return false;
      case Kind::Linear: return b_ > 0.0;
      case Kind::Power: return a_ > 0.0;
      case Kind::PiecewiseLinear:
        for (std::size_t i = 1; i < knots_.size(); ++i)
          if (!(knots_[i].second > knots_[i - 1].second)) return false;
        return true;
    }
    return false;
  }

  // Lipschitz bound of h on [0,1]; +inf for Power with q < 1 (slope blows up at 0).
  double slope_bound() const {
    switch (kind_) {
      case Kind::Constant: return 0.0;
      case Kind::Linear: return std::abs(b_);
      case Kind::Power:
        if (a_ == 0.0) return 0.0;
        return q_ == 1.0 ? a_ : std::numeric_limits<double>::infinity();
      case Kind::PiecewiseLinear: {
        double m = 0.0;
        for (std::size_t i = 1; i < knots_.size(); ++i)
          m = std::max(m, std::abs((knots_[i].second - knots_[i - 1].second) /
                                   (knots_[i].first - knots_[i - 1].first)));
        return m;
      }
    }
    return 0.0;
  }

  // Convexity of eta(t) = t*h(t).
  bool eta_convex() const {
    switch (kind_) {
      case Kind::Constant: return true;
      case Kind::Linear: return b_ >= 0.0;
      case Kind::Power: return true;
      case Kind::PiecewiseLinear: {
        // eta'' = 2*slope inside segments; knot jumps of eta' are t*(ds).
        double prev = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 1; i < knots_.size(); ++i) {
          double s = (knots_[i].second - knots_[i - 1].second) /
                     (knots_[i].first - knots_[i - 1].first);
          if (s < 0.0 || s < prev) return false;
          prev = s;
        }
        return true;
      }
    }
    return false;
  }

 private:
  static void check_domain(double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("queue: load outside [0,1]");
  }

  // Index i of the segment [t_i, t_{i+1}] with t in (t_i, t_{i+1}]; i = 0 for t = 0.
  std::size_t segment_ending_at(double t) const {
    if (t == 0.0) return 0;
    auto it = std::lower_bound(knots_.begin(), knots_.end(), t,
                               [](const std::pair<double, double>& k, double v) {
                                 return k.first < v;
                               });
    std::size_t i = static_cast<std::size_t>(it - knots_.begin());
    return i == 0 ? 0 : i - 1;
  }

  void build_prefix() {
    prefix_int_.assign(knots_.size(), 0.0);
    for (std::size_t i = 1; i < knots_.size(); ++i) {
      prefix_int_[i] = prefix_int_[i - 1] +
                       0.5 * (knots_[i].second + knots_[i - 1].second) *
                           (knots_[i].first - knots_[i - 1].first);
    }
  }

  Kind kind_ = Kind::Constant;
  double a_ = 0.0;
  double b_ = 0.0;
  double q_ = 1.0;
  std::vector<std::pair<double, double>> knots_;
  std::vector<double> prefix_int_;
};

inline double queue_eval(const QueueFunction& q, double t) { return q.value(t); }
inline double queue_derivative(const QueueFunction& q, double t) { return q.derivative(t); }
inline double queue_average(const QueueFunction& q, double t) { return q.average(t); }
inline double eta(const QueueFunction& q, double t) { return q.eta(t); }
inline double eta_prime(const QueueFunction& q, double t) { return q.eta_prime(t); }

}  // namespace cityq
