#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

namespace mfg {

using Index = Eigen::Index;

/// Box-truncated set of Fourier multi-indices k in Z^n with |k|_inf <= K.
///
/// Modes are flattened with dimension 0 varying fastest:
/// index(k) = sum_d (k_d + K) * (2K+1)^d. With this layout the mirror
/// index of -k is size() - 1 - index(k) and k = 0 sits in the middle.
class ModeLattice {
 public:
  ModeLattice(int dim, int cutoff) : dim_(dim), cutoff_(cutoff) {
    if (dim < 1) throw std::invalid_argument("ModeLattice: dimension must be >= 1");
    if (cutoff < 0) throw std::invalid_argument("ModeLattice: cutoff must be >= 0");
    side_ = 2 * cutoff + 1;
    size_ = 1;
    for (int d = 0; d < dim; ++d) size_ *= side_;
    components_.resize(size_, dim);
    norms_squared_.resize(size_);
    for (Index i = 0; i < size_; ++i) {
      Index rest = i;
      double sq = 0.0;
      for (int d = 0; d < dim; ++d) {
        const int k = static_cast<int>(rest % side_) - cutoff;
        rest /= side_;
        components_(i, d) = k;
        sq += double(k) * double(k);
      }
      norms_squared_(i) = sq;
    }
    norms_ = norms_squared_.sqrt();
  }

  int dim() const { return dim_; }
  int cutoff() const { return cutoff_; }
  int side() const { return side_; }
  Index size() const { return size_; }
  Index zero_index() const { return (size_ - 1) / 2; }
  Index mirror(Index i) const { return size_ - 1 - i; }

  int component(Index i, int d) const { return components_(i, d); }
  double norm(Index i) const { return norms_(i); }
  double norm_squared(Index i) const { return norms_squared_(i); }
  const Eigen::ArrayXd& norms() const { return norms_; }
  const Eigen::ArrayXd& norms_squared() const { return norms_squared_; }

  bool contains(std::span<const int> k) const {
    if (static_cast<int>(k.size()) != dim_) return false;
    return std::all_of(k.begin(), k.end(), [&](int c) { return std::abs(c) <= cutoff_; });
  }

  Index index(std::span<const int> k) const {
    if (!contains(k)) throw std::out_of_range("ModeLattice: multi-index outside the truncation box");
    Index idx = 0;
    Index stride = 1;
    for (int d = 0; d < dim_; ++d) {
      idx += Index(k[d] + cutoff_) * stride;
      stride *= side_;
    }
    return idx;
  }

  friend bool operator==(const ModeLattice& a, const ModeLattice& b) {
    return a.dim_ == b.dim_ && a.cutoff_ == b.cutoff_;
  }

 private:
  int dim_;
  int cutoff_;
  int side_ = 1;
  Index size_ = 1;
  Eigen::ArrayXXi components_;
  Eigen::ArrayXd norms_squared_;
  Eigen::ArrayXd norms_;
};

/// Uniform samples t_i = i T / N of [0, T] with the tent weight
/// beta(t) = 2 alpha t / T on [0, T/2] and 2 alpha - 2 alpha t / T on [T/2, T].
template <typename Real>
class TimeGrid {
 public:
  using Array = Eigen::Array<Real, Eigen::Dynamic, 1>;

  TimeGrid(Real horizon, Real alpha, int intervals)
      : horizon_(horizon), alpha_(alpha), intervals_(intervals) {
    if (!(horizon > Real(0))) throw std::invalid_argument("TimeGrid: horizon T must be > 0");
    if (!(alpha > Real(0)) || !(alpha < horizon / Real(2)))
      throw std::invalid_argument("TimeGrid: alpha must lie in the open interval (0, T/2)");
    if (intervals < 2) throw std::invalid_argument("TimeGrid: N must be >= 2");
    if (intervals % 2 != 0) throw std::invalid_argument("TimeGrid: N must be even so that T/2 is a sample");
    times_.resize(intervals + 1);
    betas_.resize(intervals + 1);
    for (int i = 0; i <= intervals; ++i) {
      // exact endpoints and midpoint
      times_(i) = (i == intervals) ? horizon : horizon * Real(i) / Real(intervals);
      betas_(i) = (2 * i <= intervals) ? Real(2) * alpha * Real(i) / Real(intervals)
                                      : Real(2) * alpha * Real(intervals - i) / Real(intervals);
    }
  }

  Real horizon() const { return horizon_; }
  Real alpha() const { return alpha_; }
  int intervals() const { return intervals_; }
  Index samples() const { return intervals_ + 1; }
  Real step() const { return horizon_ / Real(intervals_); }
  Real time(Index i) const { return times_(i); }
  Real beta(Index i) const { return betas_(i); }
  const Array& times() const { return times_; }
  const Array& betas() const { return betas_; }

  Real beta_at(Real t) const {
    return t <= horizon_ / Real(2) ? Real(2) * alpha_ * t / horizon_
                                   : Real(2) * alpha_ - Real(2) * alpha_ * t / horizon_;
  }

  /// Same horizon and alpha with `factor` times as many intervals.
  TimeGrid refined(int factor) const { return TimeGrid(horizon_, alpha_, intervals_ * factor); }

  friend bool operator==(const TimeGrid& a, const TimeGrid& b) {
    return a.horizon_ == b.horizon_ && a.alpha_ == b.alpha_ && a.intervals_ == b.intervals_;
  }

 private:
  Real horizon_;
  Real alpha_;
  int intervals_;
  Array times_;
  Array betas_;
};

template <typename Real>
TimeGrid<Real> make_grid(Real horizon, Real alpha, int intervals) {
  return TimeGrid<Real>(horizon, alpha, intervals);
}

/// Fourier coefficients of a real function on T^n at one instant:
/// f(x) = sum_k c_k exp(i k.x).
template <typename Real>
class Snapshot {
 public:
  using Complex = std::complex<Real>;
  using Coefficients = Eigen::Matrix<Complex, 1, Eigen::Dynamic>;

  explicit Snapshot(ModeLattice lattice)
      : lattice_(std::move(lattice)), coeffs_(Coefficients::Zero(lattice_.size())) {}

  Snapshot(ModeLattice lattice, Coefficients coeffs) : lattice_(std::move(lattice)), coeffs_(std::move(coeffs)) {
    if (coeffs_.size() != lattice_.size()) throw std::invalid_argument("Snapshot: coefficient count mismatch");
  }

  const ModeLattice& lattice() const { return lattice_; }
  int dim() const { return lattice_.dim(); }
  int cutoff() const { return lattice_.cutoff(); }
  const Coefficients& coeffs() const { return coeffs_; }
  Coefficients& coeffs() { return coeffs_; }

  Complex mode(std::span<const int> k) const { return coeffs_(lattice_.index(k)); }
  Complex mode(std::initializer_list<int> k) const { return mode(std::span<const int>(k.begin(), k.size())); }

  /// Sets c at k and conj(c) at -k.
  void set_pair(std::span<const int> k, Complex c) {
    const Index i = lattice_.index(k);
    coeffs_(i) = c;
    coeffs_(lattice_.mirror(i)) = std::conj(c);
    if (i == lattice_.zero_index()) coeffs_(i) = Complex(c.real(), Real(0));
  }
  void set_pair(std::initializer_list<int> k, Complex c) { set_pair(std::span<const int>(k.begin(), k.size()), c); }

  bool mean_zero() const { return coeffs_(lattice_.zero_index()) == Complex(0); }

  Snapshot& operator+=(const Snapshot& o) { check(o); coeffs_ += o.coeffs_; return *this; }
  Snapshot& operator-=(const Snapshot& o) { check(o); coeffs_ -= o.coeffs_; return *this; }
  Snapshot& operator*=(Real a) { coeffs_ *= a; return *this; }
  friend Snapshot operator+(Snapshot a, const Snapshot& b) { return a += b; }
  friend Snapshot operator-(Snapshot a, const Snapshot& b) { return a -= b; }
  friend Snapshot operator*(Real a, Snapshot b) { return b *= a; }

 private:
  void check(const Snapshot& o) const {
    if (!(lattice_ == o.lattice_)) throw std::invalid_argument("Snapshot: lattice mismatch");
  }

  ModeLattice lattice_;
  Coefficients coeffs_;
};

/// a cos(k.x)
template <typename Real>
Snapshot<Real> cosine_mode(const ModeLattice& lattice, std::span<const int> k, Real amplitude) {
  Snapshot<Real> s(lattice);
  const bool zero = std::all_of(k.begin(), k.end(), [](int c) { return c == 0; });
  s.set_pair(k, std::complex<Real>(zero ? amplitude : amplitude / Real(2), Real(0)));
  return s;
}

/// a sin(k.x)
template <typename Real>
Snapshot<Real> sine_mode(const ModeLattice& lattice, std::span<const int> k, Real amplitude) {
  Snapshot<Real> s(lattice);
  s.set_pair(k, std::complex<Real>(Real(0), -amplitude / Real(2)));
  return s;
}

/// Time-indexed coefficient table: rows are time samples, columns are modes.
template <typename Real>
class SpectralField {
 public:
  using Complex = std::complex<Real>;
  using Coefficients = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  SpectralField(TimeGrid<Real> grid, ModeLattice lattice)
      : grid_(std::move(grid)),
        lattice_(std::move(lattice)),
        coeffs_(Coefficients::Zero(grid_.samples(), lattice_.size())) {}

  SpectralField(TimeGrid<Real> grid, ModeLattice lattice, Coefficients coeffs)
      : grid_(std::move(grid)), lattice_(std::move(lattice)), coeffs_(std::move(coeffs)) {
    if (coeffs_.rows() != grid_.samples() || coeffs_.cols() != lattice_.size())
      throw std::invalid_argument("SpectralField: coefficient table shape mismatch");
  }

  static SpectralField constant_in_time(const TimeGrid<Real>& grid, const Snapshot<Real>& s) {
    SpectralField f(grid, s.lattice());
    f.coeffs_.rowwise() = s.coeffs();
    return f;
  }

  const TimeGrid<Real>& grid() const { return grid_; }
  const ModeLattice& lattice() const { return lattice_; }
  int dim() const { return lattice_.dim(); }
  int cutoff() const { return lattice_.cutoff(); }
  Index samples() const { return grid_.samples(); }
  const Coefficients& coeffs() const { return coeffs_; }
  Coefficients& coeffs() { return coeffs_; }

  Snapshot<Real> slice(Index i) const { return Snapshot<Real>(lattice_, coeffs_.row(i)); }
  void set_slice(Index i, const Snapshot<Real>& s) {
    if (!(s.lattice() == lattice_)) throw std::invalid_argument("SpectralField: lattice mismatch");
    coeffs_.row(i) = s.coeffs();
  }

  /// True when the k = 0 coefficient vanishes at every sample (image of the projection).
  bool mean_zero() const { return coeffs_.col(lattice_.zero_index()).isZero(Real(0)); }

  bool compatible(const SpectralField& o) const { return grid_ == o.grid_ && lattice_ == o.lattice_; }

  SpectralField& operator+=(const SpectralField& o) { check(o); coeffs_ += o.coeffs_; return *this; }
  SpectralField& operator-=(const SpectralField& o) { check(o); coeffs_ -= o.coeffs_; return *this; }
  SpectralField& operator*=(Real a) { coeffs_ *= a; return *this; }
  friend SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
  friend SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
  friend SpectralField operator*(Real a, SpectralField b) { return b *= a; }
  friend SpectralField operator-(SpectralField a) { a.coeffs_ = -a.coeffs_; return a; }

  /// Adds a real constant to the k = 0 mode at every sample.
  SpectralField& add_constant(Real c) {
    coeffs_.col(lattice_.zero_index()).array() += Complex(c, Real(0));
    return *this;
  }

 private:
  void check(const SpectralField& o) const {
    if (!compatible(o)) throw std::invalid_argument("SpectralField: grid or lattice mismatch");
  }

  TimeGrid<Real> grid_;
  ModeLattice lattice_;
  Coefficients coeffs_;
};

/// n components sharing one grid and lattice.
template <typename Real>
class VectorSpectralField {
 public:
  explicit VectorSpectralField(std::vector<SpectralField<Real>> components) : components_(std::move(components)) {
    if (components_.empty()) throw std::invalid_argument("VectorSpectralField: no components");
    for (const auto& c : components_)
      if (!c.compatible(components_.front()))
        throw std::invalid_argument("VectorSpectralField: components disagree on grid or lattice");
    if (static_cast<int>(components_.size()) != components_.front().dim())
      throw std::invalid_argument("VectorSpectralField: component count must equal the spatial dimension");
  }

  static VectorSpectralField zero(const TimeGrid<Real>& grid, const ModeLattice& lattice) {
    return VectorSpectralField(std::vector<SpectralField<Real>>(lattice.dim(), SpectralField<Real>(grid, lattice)));
  }

  int dim() const { return static_cast<int>(components_.size()); }
  const SpectralField<Real>& operator[](int d) const { return components_[d]; }
  SpectralField<Real>& operator[](int d) { return components_[d]; }
  const TimeGrid<Real>& grid() const { return components_.front().grid(); }
  const ModeLattice& lattice() const { return components_.front().lattice(); }
  auto begin() const { return components_.begin(); }
  auto end() const { return components_.end(); }

  VectorSpectralField& operator+=(const VectorSpectralField& o) {
    for (int d = 0; d < dim(); ++d) components_[d] += o.components_[d];
    return *this;
  }
  VectorSpectralField& operator-=(const VectorSpectralField& o) {
    for (int d = 0; d < dim(); ++d) components_[d] -= o.components_[d];
    return *this;
  }
  VectorSpectralField& operator*=(Real a) {
    for (auto& c : components_) c *= a;
    return *this;
  }
  friend VectorSpectralField operator+(VectorSpectralField a, const VectorSpectralField& b) { return a += b; }
  friend VectorSpectralField operator-(VectorSpectralField a, const VectorSpectralField& b) { return a -= b; }
  friend VectorSpectralField operator*(Real a, VectorSpectralField b) { return b *= a; }

 private:
  std::vector<SpectralField<Real>> components_;
};

using Grid = TimeGrid<double>;
using Field = SpectralField<double>;
using VectorField = VectorSpectralField<double>;
using Slice = Snapshot<double>;

// ---------------------------------------------------------------------------
// Physical-space transforms

namespace detail {

inline bool smooth_size(int m) {
  for (int p : {2, 3, 5})
    while (m % p == 0) m /= p;
  return m == 1;
}

}  // namespace detail

/// Smallest 5-smooth size >= 4K + 2, so products of two truncated fields
/// (support |k|_inf <= 2K) never wrap around.
inline int padded_size(int cutoff) {
  int m = std::max(4 * cutoff + 2, 4);
  while (!detail::smooth_size(m)) ++m;
  return m;
}

/// Evaluation of truncated series on a uniform P^n grid, x_j = 2 pi j / P, and back.
///
/// Placement folds k into k mod P, so point values are exact for any P; the
/// inverse recovers the coefficients exactly only when P >= 2K + 1.
template <typename Real>
class PeriodicTransform {
 public:
  using Complex = std::complex<Real>;
  using Values = Eigen::Matrix<Complex, Eigen::Dynamic, 1>;

  PeriodicTransform(ModeLattice lattice, int points) : lattice_(std::move(lattice)), points_(points) {
    if (points < 1) throw std::invalid_argument("PeriodicTransform: need at least one point");
    total_ = 1;
    for (int d = 0; d < lattice_.dim(); ++d) total_ *= points_;
    target_.resize(lattice_.size());
    for (Index i = 0; i < lattice_.size(); ++i) {
      Index pos = 0;
      Index stride = 1;
      for (int d = 0; d < lattice_.dim(); ++d) {
        int k = lattice_.component(i, d) % points_;
        if (k < 0) k += points_;
        pos += k * stride;
        stride *= points_;
      }
      target_[i] = pos;
    }
  }

  int points() const { return points_; }
  Index total() const { return total_; }
  const ModeLattice& lattice() const { return lattice_; }

  template <typename Row>
  Values to_physical(const Row& coeffs) const {
    Values grid = Values::Zero(total_);
    for (Index i = 0; i < lattice_.size(); ++i) grid(target_[i]) += coeffs(i);
    transform_all(grid, /*inverse=*/true);
    return grid;
  }

  Eigen::Matrix<Complex, 1, Eigen::Dynamic> to_modes(Values grid) const {
    transform_all(grid, /*inverse=*/false);
    const Real scale = Real(1) / Real(total_);
    Eigen::Matrix<Complex, 1, Eigen::Dynamic> out(lattice_.size());
    for (Index i = 0; i < lattice_.size(); ++i) out(i) = grid(target_[i]) * scale;
    return out;
  }

 private:
  void transform_all(Values& grid, bool inverse) const {
    thread_local Eigen::FFT<Real> fft;
    fft.SetFlag(Eigen::FFT<Real>::Unscaled);
    std::vector<Complex> in(points_), out(points_);
    Index stride = 1;
    for (int d = 0; d < lattice_.dim(); ++d) {
      const Index block = stride * points_;
      for (Index base = 0; base < total_; base += block) {
        for (Index off = 0; off < stride; ++off) {
          for (int j = 0; j < points_; ++j) in[j] = grid(base + off + j * stride);
          if (inverse)
            fft.inv(out.data(), in.data(), points_);
          else
            fft.fwd(out.data(), in.data(), points_);
          for (int j = 0; j < points_; ++j) grid(base + off + j * stride) = out[j];
        }
      }
      stride *= points_;
    }
  }

  ModeLattice lattice_;
  int points_;
  Index total_ = 1;
  std::vector<Index> target_;
};

/// Real point values of s on the uniform P^n grid (dimension 0 fastest).
template <typename Real>
Eigen::Array<Real, Eigen::Dynamic, 1> sample_physical(const Snapshot<Real>& s, int points) {
  PeriodicTransform<Real> tr(s.lattice(), points);
  return tr.to_physical(s.coeffs()).real().array();
}

template <typename Real>
Real evaluate_physical(const Snapshot<Real>& s, std::span<const Real> x) {
  const ModeLattice& lat = s.lattice();
  if (static_cast<int>(x.size()) != lat.dim()) throw std::invalid_argument("evaluate_physical: point dimension mismatch");
  std::complex<Real> acc(0);
  for (Index i = 0; i < lat.size(); ++i) {
    Real phase(0);
    for (int d = 0; d < lat.dim(); ++d) phase += Real(lat.component(i, d)) * x[d];
    acc += s.coeffs()(i) * std::polar(Real(1), phase);
  }
  return acc.real();
}

template <typename Real>
Real evaluate_physical(const SpectralField<Real>& f, Index i, std::span<const Real> x) {
  return evaluate_physical(f.slice(i), x);
}

// ---------------------------------------------------------------------------
// Linear operations

template <typename Real>
Snapshot<Real> project_mean_zero(Snapshot<Real> s) {
  s.coeffs()(s.lattice().zero_index()) = 0;
  return s;
}

template <typename Real>
SpectralField<Real> project_mean_zero(SpectralField<Real> f) {
  f.coeffs().col(f.lattice().zero_index()).setZero();
  return f;
}

/// i k_d c_k
template <typename Real>
SpectralField<Real> partial(const SpectralField<Real>& f, int d) {
  SpectralField<Real> out = f;
  const ModeLattice& lat = f.lattice();
  for (Index i = 0; i < lat.size(); ++i)
    out.coeffs().col(i) *= std::complex<Real>(Real(0), Real(lat.component(i, d)));
  return out;
}

template <typename Real>
VectorSpectralField<Real> gradient(const SpectralField<Real>& f) {
  std::vector<SpectralField<Real>> comps;
  comps.reserve(f.dim());
  for (int d = 0; d < f.dim(); ++d) comps.push_back(partial(f, d));
  return VectorSpectralField<Real>(std::move(comps));
}

template <typename Real>
SpectralField<Real> divergence(const VectorSpectralField<Real>& v) {
  SpectralField<Real> out = partial(v[0], 0);
  for (int d = 1; d < v.dim(); ++d) out += partial(v[d], d);
  out.coeffs().col(out.lattice().zero_index()).setZero();
  return out;
}

template <typename Real>
SpectralField<Real> laplacian(const SpectralField<Real>& f) {
  SpectralField<Real> out = f;
  const ModeLattice& lat = f.lattice();
  for (Index i = 0; i < lat.size(); ++i) out.coeffs().col(i) *= Real(-lat.norm_squared(i));
  return out;
}

/// Slice-level i k_d c_k.
template <typename Real>
Snapshot<Real> partial(const Snapshot<Real>& s, int d) {
  Snapshot<Real> out = s;
  const ModeLattice& lat = s.lattice();
  for (Index i = 0; i < lat.size(); ++i) out.coeffs()(i) *= std::complex<Real>(Real(0), Real(lat.component(i, d)));
  return out;
}

template <typename Real>
std::vector<Snapshot<Real>> gradient(const Snapshot<Real>& s) {
  std::vector<Snapshot<Real>> out;
  for (int d = 0; d < s.dim(); ++d) out.push_back(partial(s, d));
  return out;
}

template <typename Real>
Snapshot<Real> divergence(std::span<const Snapshot<Real>> v) {
  Snapshot<Real> out = partial(v[0], 0);
  for (int d = 1; d < static_cast<int>(v.size()); ++d) out += partial(v[d], d);
  out.coeffs()(out.lattice().zero_index()) = 0;
  return out;
}

// ---------------------------------------------------------------------------
// Dealiased products

/// Truncated product: retained coefficients are the exact convolution
/// sum_j f_(k-j) g_j of the two truncated inputs.
template <typename Real>
Snapshot<Real> product(const Snapshot<Real>& f, const Snapshot<Real>& g) {
  if (!(f.lattice() == g.lattice())) throw std::invalid_argument("product: lattice mismatch");
  PeriodicTransform<Real> tr(f.lattice(), padded_size(f.cutoff()));
  auto pf = tr.to_physical(f.coeffs());
  auto pg = tr.to_physical(g.coeffs());
  return Snapshot<Real>(f.lattice(), tr.to_modes(pf.cwiseProduct(pg)));
}

template <typename Real>
SpectralField<Real> product(const SpectralField<Real>& f, const SpectralField<Real>& g) {
  if (!f.compatible(g)) throw std::invalid_argument("product: grid or lattice mismatch");
  PeriodicTransform<Real> tr(f.lattice(), padded_size(f.cutoff()));
  SpectralField<Real> out(f.grid(), f.lattice());
  for (Index i = 0; i < f.samples(); ++i) {
    auto pf = tr.to_physical(f.coeffs().row(i));
    auto pg = tr.to_physical(g.coeffs().row(i));
    out.coeffs().row(i) = tr.to_modes(pf.cwiseProduct(pg));
  }
  return out;
}

/// Product with a time-independent factor.
template <typename Real>
SpectralField<Real> product(const SpectralField<Real>& f, const Snapshot<Real>& a) {
  if (!(f.lattice() == a.lattice())) throw std::invalid_argument("product: lattice mismatch");
  PeriodicTransform<Real> tr(f.lattice(), padded_size(f.cutoff()));
  const auto pa = tr.to_physical(a.coeffs());
  SpectralField<Real> out(f.grid(), f.lattice());
  for (Index i = 0; i < f.samples(); ++i)
    out.coeffs().row(i) = tr.to_modes(tr.to_physical(f.coeffs().row(i)).cwiseProduct(pa));
  return out;
}

// ---------------------------------------------------------------------------
// Norms

/// |s|_{B^j} = sum_k (1 + |k|^j) |c_k|
template <typename Real>
Real wiener_norm(const Snapshot<Real>& s, int j) {
  const auto w = Real(1) + s.lattice().norms().pow(double(j)).template cast<Real>();
  return (w * s.coeffs().transpose().array().abs()).sum();
}

/// ||f||_{B_alpha^j} = sum_k sup_i (1 + |k|^j) exp(beta(t_i) |k|) |c(t_i, k)|,
/// the supremum taken over the grid samples.
template <typename Real>
Real space_time_norm(const SpectralField<Real>& f, int j) {
  const ModeLattice& lat = f.lattice();
  const auto& betas = f.grid().betas();
  Real total(0);
  for (Index i = 0; i < lat.size(); ++i) {
    const Real kn = Real(lat.norm(i));
    const Real w = Real(1) + Real(std::pow(lat.norm(i), double(j)));
    const auto col = f.coeffs().col(i).array().abs();
    if ((col == Real(0)).all()) continue;
    total += w * (col * (betas * kn).exp()).maxCoeff();
  }
  return total;
}

/// Sum of component norms, the (B_alpha^j)^n norm.
template <typename Real>
Real space_time_norm(const VectorSpectralField<Real>& v, int j) {
  Real total(0);
  for (const auto& c : v) total += space_time_norm(c, j);
  return total;
}

/// Largest |c_k - conj(c_{-k})|, zero for coefficient sets of real functions.
template <typename Real>
Real hermitian_defect(const Snapshot<Real>& s) {
  Real worst(0);
  const ModeLattice& lat = s.lattice();
  for (Index i = 0; i < lat.size(); ++i)
    worst = std::max(worst, std::abs(s.coeffs()(i) - std::conj(s.coeffs()(lat.mirror(i)))));
  return worst;
}

template <typename Real>
Real hermitian_defect(const SpectralField<Real>& f) {
  Real worst(0);
  for (Index i = 0; i < f.samples(); ++i) worst = std::max(worst, hermitian_defect(f.slice(i)));
  return worst;
}

template <typename Real>
Real max_abs_difference(const SpectralField<Real>& a, const SpectralField<Real>& b) {
  if (!a.compatible(b)) throw std::invalid_argument("max_abs_difference: grid or lattice mismatch");
  return (a.coeffs() - b.coeffs()).cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------------------
// Analyticity diagnostic

class DegenerateFit : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DecayFit {
  double intercept = 0.0;
  double slope = 0.0;
  int modes_used = 0;
};

/// Least-squares fit of ln|c(t_i, k)| against |k| over the modes above
/// 1e-13 times the largest magnitude at that time.
template <typename Real>
DecayFit decay_fit(const Snapshot<Real>& s, double relative_floor = 1e-13) {
  const ModeLattice& lat = s.lattice();
  const auto mags = s.coeffs().array().abs().template cast<double>().eval();
  const double peak = mags.maxCoeff();
  if (!(peak > 0.0)) throw DegenerateFit("decay_fit: field vanishes at this time");
  std::vector<double> xs, ys;
  for (Index i = 0; i < lat.size(); ++i) {
    if (mags(i) > relative_floor * peak) {
      xs.push_back(lat.norm(i));
      ys.push_back(std::log(mags(i)));
    }
  }
  if (xs.size() < 3) throw DegenerateFit("decay_fit: fewer than 3 modes above the noise floor");
  const double n = double(xs.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) { sx += xs[i]; sy += ys[i]; }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx <= 0.0) throw DegenerateFit("decay_fit: all retained modes share one wavenumber magnitude");
  DecayFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.modes_used = static_cast<int>(xs.size());
  return fit;
}

template <typename Real>
DecayFit decay_fit(const SpectralField<Real>& f, Index i, double relative_floor = 1e-13) {
  return decay_fit(f.slice(i), relative_floor);
}

}  // namespace mfg
