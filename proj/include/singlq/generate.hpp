#pragma once

// Random problem instances. Pi is assembled from a random factor [C D], so it
// is PSD by construction.
//
//   quadruple  A, B, C, D with entries uniform in [-1, 1]
//   regular    as quadruple with an identity row block appended to D
//   cheap      D = 0 (so S = 0, R = 0)
//   hurwitz    as quadruple with A shifted to be stable
//
// `stable` applies the Hurwitz shift to any class.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "singlq/io.hpp"
#include "singlq/matlib.hpp"

namespace singlq {

enum class InstanceClass { quadruple, regular, cheap, hurwitz };

inline const char* to_string(InstanceClass c) {
  switch (c) {
    case InstanceClass::quadruple: return "quadruple";
    case InstanceClass::regular: return "regular";
    case InstanceClass::cheap: return "cheap";
    case InstanceClass::hurwitz: return "hurwitz";
  }
  return "?";
}

inline InstanceClass parse_instance_class(std::string_view s) {
  for (InstanceClass c : {InstanceClass::quadruple, InstanceClass::regular, InstanceClass::cheap,
                          InstanceClass::hurwitz}) {
    if (s == to_string(c)) return c;
  }
  throw ValidationError("unknown instance class '" + std::string(s) +
                        "' (expected quadruple, regular, cheap or hurwitz)");
}

inline constexpr Index kMaxGeneratedStates = 12;
inline constexpr Index kMaxGeneratedInputs = 6;

struct GenerateOptions {
  std::uint64_t seed = 1;
  Index n = 2;
  Index m = 1;
  InstanceClass cls = InstanceClass::quadruple;
  bool stable = false;

  void validate() const {
    if (n < 1 || n > kMaxGeneratedStates || m < 1 || m > kMaxGeneratedInputs) {
      throw DimensionError("generate: need 1 <= n <= 12 and 1 <= m <= 6");
    }
  }
};

/// Platform-independent draws from a 64-bit Mersenne Twister.
class InstanceRng {
 public:
  explicit InstanceRng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [-1, 1) from the top 53 bits.
  double symmetric() { return 2.0 * unit() - 1.0; }
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [lo, hi].
  Index integer(Index lo, Index hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo + 1);
    return lo + static_cast<Index>(engine_() % span);
  }

  Matrix matrix(Index rows, Index cols) {
    Matrix M(rows, cols);
    for (Index i = 0; i < rows; ++i) {
      for (Index j = 0; j < cols; ++j) M(i, j) = symmetric();
    }
    return M;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

/// Shifts A so that its spectral abscissa equals -margin (no-op when already
/// at least that stable).
inline Matrix hurwitz_shift(const Matrix& A, double margin) {
  const double alpha = spectral_abscissa(A);
  if (alpha <= -margin) return A;
  return A - (alpha + margin) * Matrix::Identity(A.rows(), A.cols());
}

inline ProblemDocument generate_instance(InstanceRng& rng, const GenerateOptions& opts, Index index) {
  opts.validate();
  const Index n = opts.n, m = opts.m;
  Matrix A = rng.matrix(n, n);
  const Matrix B = rng.matrix(n, m);
  const Index p = rng.integer(1, n + m);
  const Matrix C = rng.matrix(p, n);
  Matrix D = rng.matrix(p, m);
  const double margin = 0.1 + 0.9 * rng.unit();

  Matrix CD;
  switch (opts.cls) {
    case InstanceClass::regular: {
      CD = Matrix::Zero(p + m, n + m);
      CD.topLeftCorner(p, n) = C;
      CD.topRightCorner(p, m) = D;
      CD.bottomRightCorner(m, m) = Matrix::Identity(m, m);
      break;
    }
    case InstanceClass::cheap:
      D.setZero();
      [[fallthrough]];
    default:
      CD.resize(p, n + m);
      CD << C, D;
  }
  if (opts.cls == InstanceClass::hurwitz || opts.stable) A = hurwitz_shift(A, margin);

  const Matrix Pi = symmetrized(CD.transpose() * CD);
  ProblemDocument doc;
  doc.name = std::string(to_string(opts.cls)) + (opts.stable ? "-stable" : "") + "-s" +
             std::to_string(opts.seed) + "-" + std::to_string(index);
  doc.n = n;
  doc.m = m;
  doc.A = A;
  doc.B = B;
  doc.Q = Pi.topLeftCorner(n, n);
  doc.S = Pi.topRightCorner(n, m);
  doc.R = Pi.bottomRightCorner(m, m);
  return doc;
}

/// `count` instances from one engine seeded with `seed`; a shorter run is a
/// prefix of a longer one.
inline std::vector<ProblemDocument> generate_instances(const GenerateOptions& opts, Index count) {
  opts.validate();
  if (count < 0) throw ValidationError("generate: count must be nonnegative");
  InstanceRng rng(opts.seed);
  std::vector<ProblemDocument> docs;
  docs.reserve(static_cast<std::size_t>(count));
  for (Index k = 0; k < count; ++k) docs.push_back(generate_instance(rng, opts, k));
  return docs;
}

}  // namespace singlq
