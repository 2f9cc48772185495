#pragma once

#include "hps/rational.hpp"

namespace hps {

/// Closed interval with exact rational endpoints.
struct IntervalR {
  Rational lo;
  Rational hi;

  Rational length() const { return hi - lo; }
  bool contains(const IntervalR& other) const { return lo <= other.lo && other.hi <= hi; }
  bool operator==(const IntervalR& other) const { return lo == other.lo && hi == other.hi; }
};

/// Closed interval in double precision (image-side geometry).
struct IntervalD {
  double lo;
  double hi;

  double length() const { return hi - lo; }
};

}  // namespace hps
