#include "rdstack/nn/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "rdstack/error.hpp"

namespace rdstack::nn::kernels {

std::size_t ConvGeometry::input_size() const noexcept {
  return static_cast<std::size_t>(batch) * in_c * in_h * in_w;
}
std::size_t ConvGeometry::output_size() const noexcept {
  return static_cast<std::size_t>(batch) * out_c * out_h() * out_w();
}
std::size_t ConvGeometry::weight_size() const noexcept {
  return static_cast<std::size_t>(out_c) * (in_c / groups) * k_h * k_w;
}

void ConvGeometry::validate() const {
  if (batch < 1 || in_c < 1 || out_c < 1 || in_h < 1 || in_w < 1 || k_h < 1 || k_w < 1 || stride < 1 ||
      dilation < 1 || groups < 1 || pad_h < 0 || pad_w < 0) {
    fail(ErrorCategory::invalid_argument, "conv2d: non-positive geometry");
  }
  if (in_c % groups != 0 || out_c % groups != 0) {
    fail(ErrorCategory::invalid_argument, "conv2d: channels not divisible by groups");
  }
  if (out_h() < 1 || out_w() < 1) fail(ErrorCategory::shape_mismatch, "conv2d: kernel larger than padded input");
}

std::size_t SpectralGeometry::weight_size() const noexcept {
  return static_cast<std::size_t>(in_c) * out_c * weight_rows() * modes_w;
}

void SpectralGeometry::validate() const {
  if (batch < 1 || in_c < 1 || out_c < 1 || h < 1 || w < 1 || modes_h < 1 || modes_w < 1) {
    fail(ErrorCategory::invalid_argument, "spectral_conv: non-positive geometry");
  }
  if (modes_h > h / 2 + 1 || modes_w > w / 2 + 1) {
    fail(ErrorCategory::invalid_argument, "spectral_conv: modes (" + std::to_string(modes_h) + ", " +
                                              std::to_string(modes_w) + ") exceed the " + std::to_string(h) + "x" +
                                              std::to_string(w) + " grid (limit floor(n/2)+1)");
  }
}

namespace {

struct ColumnRange {
  int lo;
  int hi;
};

// Output columns whose input column ow*stride + offset lies inside [0, width).
ColumnRange valid_columns(int offset, int stride, int width, int out_width) {
  const int lo = offset >= 0 ? 0 : (-offset + stride - 1) / stride;
  const int last = width - 1 - offset;
  const int hi = last < 0 ? 0 : std::min(out_width, last / stride + 1);
  return {lo, std::max(lo, hi)};
}

}  // namespace

void conv2d_forward(const ConvGeometry& g, std::span<const double> input, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> output) {
  const int oh_n = g.out_h();
  const int ow_n = g.out_w();
  const int icg = g.in_c / g.groups;
  const int ocg = g.out_c / g.groups;
  const std::size_t in_plane = static_cast<std::size_t>(g.in_h) * g.in_w;
  const std::size_t out_plane = static_cast<std::size_t>(oh_n) * ow_n;
  const double* in = input.data();
  const double* wt = weight.data();
  double* out = output.data();
  const bool has_bias = !bias.empty();

#pragma omp parallel for schedule(static)
  for (int bo = 0; bo < g.batch * g.out_c; ++bo) {
    const int b = bo / g.out_c;
    const int o = bo % g.out_c;
    const int grp = o / ocg;
    double* dst = out + static_cast<std::size_t>(bo) * out_plane;
    std::fill(dst, dst + out_plane, has_bias ? bias[static_cast<std::size_t>(o)] : 0.0);
    for (int icl = 0; icl < icg; ++icl) {
      const int ic = grp * icg + icl;
      const double* src = in + (static_cast<std::size_t>(b) * g.in_c + ic) * in_plane;
      const double* wk = wt + (static_cast<std::size_t>(o) * icg + icl) * g.k_h * g.k_w;
      for (int kh = 0; kh < g.k_h; ++kh) {
        for (int kw = 0; kw < g.k_w; ++kw) {
          const double wv = wk[kh * g.k_w + kw];
          const int col_off = kw * g.dilation - g.pad_w;
          const ColumnRange cols = valid_columns(col_off, g.stride, g.in_w, ow_n);
          for (int oh = 0; oh < oh_n; ++oh) {
            const int ih = oh * g.stride + kh * g.dilation - g.pad_h;
            if (ih < 0 || ih >= g.in_h) continue;
            const double* irow = src + static_cast<std::ptrdiff_t>(ih) * g.in_w + col_off;
            double* orow = dst + static_cast<std::ptrdiff_t>(oh) * ow_n;
            if (g.stride == 1) {
              for (int ow = cols.lo; ow < cols.hi; ++ow) orow[ow] += wv * irow[ow];
            } else {
              for (int ow = cols.lo; ow < cols.hi; ++ow) orow[ow] += wv * irow[ow * g.stride];
            }
          }
        }
      }
    }
  }
}

void conv2d_backward_input(const ConvGeometry& g, std::span<const double> grad_output,
                           std::span<const double> weight, std::span<double> grad_input) {
  const int oh_n = g.out_h();
  const int ow_n = g.out_w();
  const int icg = g.in_c / g.groups;
  const int ocg = g.out_c / g.groups;
  const std::size_t in_plane = static_cast<std::size_t>(g.in_h) * g.in_w;
  const std::size_t out_plane = static_cast<std::size_t>(oh_n) * ow_n;
  const double* gout = grad_output.data();
  const double* wt = weight.data();
  double* gin = grad_input.data();

#pragma omp parallel for schedule(static)
  for (int bi = 0; bi < g.batch * g.in_c; ++bi) {
    const int b = bi / g.in_c;
    const int ic = bi % g.in_c;
    const int grp = ic / icg;
    const int icl = ic % icg;
    double* dst = gin + static_cast<std::size_t>(bi) * in_plane;
    for (int ol = 0; ol < ocg; ++ol) {
      const int o = grp * ocg + ol;
      const double* src = gout + (static_cast<std::size_t>(b) * g.out_c + o) * out_plane;
      const double* wk = wt + (static_cast<std::size_t>(o) * icg + icl) * g.k_h * g.k_w;
      for (int kh = 0; kh < g.k_h; ++kh) {
        for (int kw = 0; kw < g.k_w; ++kw) {
          const double wv = wk[kh * g.k_w + kw];
          const int col_off = kw * g.dilation - g.pad_w;
          const ColumnRange cols = valid_columns(col_off, g.stride, g.in_w, ow_n);
          for (int oh = 0; oh < oh_n; ++oh) {
            const int ih = oh * g.stride + kh * g.dilation - g.pad_h;
            if (ih < 0 || ih >= g.in_h) continue;
            double* irow = dst + static_cast<std::ptrdiff_t>(ih) * g.in_w + col_off;
            const double* orow = src + static_cast<std::ptrdiff_t>(oh) * ow_n;
            if (g.stride == 1) {
              for (int ow = cols.lo; ow < cols.hi; ++ow) irow[ow] += wv * orow[ow];
            } else {
              for (int ow = cols.lo; ow < cols.hi; ++ow) irow[ow * g.stride] += wv * orow[ow];
            }
          }
        }
      }
    }
  }
}

void conv2d_backward_weight(const ConvGeometry& g, std::span<const double> input,
                            std::span<const double> grad_output, std::span<double> grad_weight,
                            std::span<double> grad_bias) {
  const int oh_n = g.out_h();
  const int ow_n = g.out_w();
  const int icg = g.in_c / g.groups;
  const int ocg = g.out_c / g.groups;
  const std::size_t in_plane = static_cast<std::size_t>(g.in_h) * g.in_w;
  const std::size_t out_plane = static_cast<std::size_t>(oh_n) * ow_n;
  const double* in = input.data();
  const double* gout = grad_output.data();
  double* gw = grad_weight.data();
  const bool has_bias = !grad_bias.empty();

#pragma omp parallel for schedule(static)
  for (int o = 0; o < g.out_c; ++o) {
    const int grp = o / ocg;
    for (int icl = 0; icl < icg; ++icl) {
      const int ic = grp * icg + icl;
      double* wk = gw + (static_cast<std::size_t>(o) * icg + icl) * g.k_h * g.k_w;
      for (int kh = 0; kh < g.k_h; ++kh) {
        for (int kw = 0; kw < g.k_w; ++kw) {
          const int col_off = kw * g.dilation - g.pad_w;
          const ColumnRange cols = valid_columns(col_off, g.stride, g.in_w, ow_n);
          double acc = 0.0;
          for (int b = 0; b < g.batch; ++b) {
            const double* src = in + (static_cast<std::size_t>(b) * g.in_c + ic) * in_plane;
            const double* go = gout + (static_cast<std::size_t>(b) * g.out_c + o) * out_plane;
            for (int oh = 0; oh < oh_n; ++oh) {
              const int ih = oh * g.stride + kh * g.dilation - g.pad_h;
              if (ih < 0 || ih >= g.in_h) continue;
              const double* irow = src + static_cast<std::ptrdiff_t>(ih) * g.in_w + col_off;
              const double* orow = go + static_cast<std::ptrdiff_t>(oh) * ow_n;
              if (g.stride == 1) {
                for (int ow = cols.lo; ow < cols.hi; ++ow) acc += orow[ow] * irow[ow];
              } else {
                for (int ow = cols.lo; ow < cols.hi; ++ow) acc += orow[ow] * irow[ow * g.stride];
              }
            }
          }
          wk[kh * g.k_w + kw] += acc;
        }
      }
    }
    if (has_bias) {
      double acc = 0.0;
      for (int b = 0; b < g.batch; ++b) {
        const double* go = gout + (static_cast<std::size_t>(b) * g.out_c + o) * out_plane;
        for (std::size_t k = 0; k < out_plane; ++k) acc += go[k];
      }
      grad_bias[static_cast<std::size_t>(o)] += acc;
    }
  }
}

namespace {

/// Twiddle tables and row bookkeeping shared by the spectral kernels.
struct SpectralPlan {
  int rows;                  // weight slots along the row axis
  std::vector<int> row_of;   // slot -> grid row
  std::vector<char> used;    // slot is the first to claim its grid row
  std::vector<double> cos_r, sin_r;  // [slot][x]: angle 2 pi row x / h
  std::vector<double> cos_c, sin_c;  // [ky][y]:   angle 2 pi ky y / w
  std::vector<double> weight_c;      // irfft multiplicity of column ky

  explicit SpectralPlan(const SpectralGeometry& g) : rows(g.weight_rows()) {
    const double two_pi = 2.0 * std::numbers::pi;
    row_of.resize(static_cast<std::size_t>(rows));
    used.assign(static_cast<std::size_t>(rows), 0);
    std::vector<char> claimed(static_cast<std::size_t>(g.h), 0);
    for (int s = 0; s < rows; ++s) {
      const int freq = s - (g.modes_h - 1);
      const int r = ((freq % g.h) + g.h) % g.h;
      row_of[static_cast<std::size_t>(s)] = r;
      if (!claimed[static_cast<std::size_t>(r)]) {
        claimed[static_cast<std::size_t>(r)] = 1;
        used[static_cast<std::size_t>(s)] = 1;
      }
    }
    cos_r.resize(static_cast<std::size_t>(rows) * g.h);
    sin_r.resize(cos_r.size());
    for (int s = 0; s < rows; ++s) {
      for (int x = 0; x < g.h; ++x) {
        // Reduce the integer phase first so large grids keep full precision.
        const long phase = (static_cast<long>(row_of[static_cast<std::size_t>(s)]) * x) % g.h;
        const double a = two_pi * static_cast<double>(phase) / g.h;
        cos_r[static_cast<std::size_t>(s) * g.h + x] = std::cos(a);
        sin_r[static_cast<std::size_t>(s) * g.h + x] = std::sin(a);
      }
    }
    cos_c.resize(static_cast<std::size_t>(g.modes_w) * g.w);
    sin_c.resize(cos_c.size());
    weight_c.resize(static_cast<std::size_t>(g.modes_w));
    for (int ky = 0; ky < g.modes_w; ++ky) {
      for (int y = 0; y < g.w; ++y) {
        const long phase = (static_cast<long>(ky) * y) % g.w;
        const double a = two_pi * static_cast<double>(phase) / g.w;
        cos_c[static_cast<std::size_t>(ky) * g.w + y] = std::cos(a);
        sin_c[static_cast<std::size_t>(ky) * g.w + y] = std::sin(a);
      }
      const bool self_conjugate = ky == 0 || (g.w % 2 == 0 && ky == g.w / 2);
      weight_c[static_cast<std::size_t>(ky)] = self_conjugate ? 1.0 : 2.0;
    }
  }
};

// Complex spectrum of one plane at the retained modes: out[slot][ky] (re, im).
void forward_transform(const SpectralGeometry& g, const SpectralPlan& p, const double* x, double* re, double* im,
                       std::vector<double>& are, std::vector<double>& aim) {
  const int mw = g.modes_w;
  are.assign(static_cast<std::size_t>(g.h) * mw, 0.0);
  aim.assign(are.size(), 0.0);
  for (int r = 0; r < g.h; ++r) {
    const double* row = x + static_cast<std::size_t>(r) * g.w;
    for (int ky = 0; ky < mw; ++ky) {
      const double* c = p.cos_c.data() + static_cast<std::size_t>(ky) * g.w;
      const double* s = p.sin_c.data() + static_cast<std::size_t>(ky) * g.w;
      double sr = 0.0;
      double si = 0.0;
      for (int y = 0; y < g.w; ++y) {
        sr += row[y] * c[y];
        si -= row[y] * s[y];
      }
      are[static_cast<std::size_t>(r) * mw + ky] = sr;
      aim[static_cast<std::size_t>(r) * mw + ky] = si;
    }
  }
  for (int slot = 0; slot < p.rows; ++slot) {
    const double* c = p.cos_r.data() + static_cast<std::size_t>(slot) * g.h;
    const double* s = p.sin_r.data() + static_cast<std::size_t>(slot) * g.h;
    for (int ky = 0; ky < mw; ++ky) {
      double sr = 0.0;
      double si = 0.0;
      if (p.used[static_cast<std::size_t>(slot)]) {
        for (int r = 0; r < g.h; ++r) {
          const double ar = are[static_cast<std::size_t>(r) * mw + ky];
          const double ai = aim[static_cast<std::size_t>(r) * mw + ky];
          // (ar + i ai)(cos - i sin)
          sr += ar * c[r] + ai * s[r];
          si += ai * c[r] - ar * s[r];
        }
      }
      re[static_cast<std::size_t>(slot) * mw + ky] = sr;
      im[static_cast<std::size_t>(slot) * mw + ky] = si;
    }
  }
}

}  // namespace

void spectral_forward(const SpectralGeometry& g, std::span<const double> input, std::span<const double> weight_re,
                      std::span<const double> weight_im, std::span<double> output) {
  const SpectralPlan p(g);
  const int mw = g.modes_w;
  const std::size_t modes = static_cast<std::size_t>(p.rows) * mw;
  const std::size_t plane = static_cast<std::size_t>(g.h) * g.w;
  std::vector<double> xre(static_cast<std::size_t>(g.batch) * g.in_c * modes);
  std::vector<double> xim(xre.size());

#pragma omp parallel
  {
    std::vector<double> are, aim;
#pragma omp for schedule(static)
    for (int bi = 0; bi < g.batch * g.in_c; ++bi) {
      forward_transform(g, p, input.data() + static_cast<std::size_t>(bi) * plane,
                        xre.data() + static_cast<std::size_t>(bi) * modes,
                        xim.data() + static_cast<std::size_t>(bi) * modes, are, aim);
    }
  }

  const double norm = 1.0 / static_cast<double>(plane);
#pragma omp parallel
  {
    std::vector<double> yre(modes), yim(modes);
    std::vector<double> bre(static_cast<std::size_t>(g.h) * mw), bim(bre.size());
#pragma omp for schedule(static)
    for (int bo = 0; bo < g.batch * g.out_c; ++bo) {
      const int b = bo / g.out_c;
      const int o = bo % g.out_c;
      std::fill(yre.begin(), yre.end(), 0.0);
      std::fill(yim.begin(), yim.end(), 0.0);
      for (int i = 0; i < g.in_c; ++i) {
        const double* ar = xre.data() + (static_cast<std::size_t>(b) * g.in_c + i) * modes;
        const double* ai = xim.data() + (static_cast<std::size_t>(b) * g.in_c + i) * modes;
        const double* wr = weight_re.data() + (static_cast<std::size_t>(i) * g.out_c + o) * modes;
        const double* wi = weight_im.data() + (static_cast<std::size_t>(i) * g.out_c + o) * modes;
        for (std::size_t k = 0; k < modes; ++k) {
          yre[k] += ar[k] * wr[k] - ai[k] * wi[k];
          yim[k] += ar[k] * wi[k] + ai[k] * wr[k];
        }
      }
      // B[x][ky] = sum_slot Y e^{+i phi}
      for (int x = 0; x < g.h; ++x) {
        for (int ky = 0; ky < mw; ++ky) {
          double sr = 0.0;
          double si = 0.0;
          for (int slot = 0; slot < p.rows; ++slot) {
            if (!p.used[static_cast<std::size_t>(slot)]) continue;
            const double c = p.cos_r[static_cast<std::size_t>(slot) * g.h + x];
            const double s = p.sin_r[static_cast<std::size_t>(slot) * g.h + x];
            const double yr = yre[static_cast<std::size_t>(slot) * mw + ky];
            const double yi = yim[static_cast<std::size_t>(slot) * mw + ky];
            sr += yr * c - yi * s;
            si += yr * s + yi * c;
          }
          bre[static_cast<std::size_t>(x) * mw + ky] = sr;
          bim[static_cast<std::size_t>(x) * mw + ky] = si;
        }
      }
      double* dst = output.data() + static_cast<std::size_t>(bo) * plane;
      for (int x = 0; x < g.h; ++x) {
        double* row = dst + static_cast<std::size_t>(x) * g.w;
        std::fill(row, row + g.w, 0.0);
        for (int ky = 0; ky < mw; ++ky) {
          const double f = p.weight_c[static_cast<std::size_t>(ky)] * norm;
          const double br = f * bre[static_cast<std::size_t>(x) * mw + ky];
          const double bi = f * bim[static_cast<std::size_t>(x) * mw + ky];
          const double* c = p.cos_c.data() + static_cast<std::size_t>(ky) * g.w;
          const double* s = p.sin_c.data() + static_cast<std::size_t>(ky) * g.w;
          for (int y = 0; y < g.w; ++y) row[y] += br * c[y] - bi * s[y];
        }
      }
    }
  }
}

void spectral_backward(const SpectralGeometry& g, std::span<const double> input, std::span<const double> weight_re,
                       std::span<const double> weight_im, std::span<const double> grad_output,
                       std::span<double> grad_input, std::span<double> grad_weight_re,
                       std::span<double> grad_weight_im) {
  const SpectralPlan p(g);
  const int mw = g.modes_w;
  const std::size_t modes = static_cast<std::size_t>(p.rows) * mw;
  const std::size_t plane = static_cast<std::size_t>(g.h) * g.w;
  const double norm = 1.0 / static_cast<double>(plane);

  std::vector<double> xre(static_cast<std::size_t>(g.batch) * g.in_c * modes), xim(xre.size());
  std::vector<double> gyre(static_cast<std::size_t>(g.batch) * g.out_c * modes), gyim(gyre.size());

#pragma omp parallel
  {
    std::vector<double> are, aim;
#pragma omp for schedule(static)
    for (int bi = 0; bi < g.batch * g.in_c; ++bi) {
      forward_transform(g, p, input.data() + static_cast<std::size_t>(bi) * plane,
                        xre.data() + static_cast<std::size_t>(bi) * modes,
                        xim.data() + static_cast<std::size_t>(bi) * modes, are, aim);
    }
  }

  // Gradient w.r.t. the mixed spectrum Y of every output plane.
#pragma omp parallel
  {
    std::vector<double> gbr(static_cast<std::size_t>(g.h) * mw), gbi(gbr.size());
#pragma omp for schedule(static)
    for (int bo = 0; bo < g.batch * g.out_c; ++bo) {
      const double* gy = grad_output.data() + static_cast<std::size_t>(bo) * plane;
      for (int x = 0; x < g.h; ++x) {
        const double* row = gy + static_cast<std::size_t>(x) * g.w;
        for (int ky = 0; ky < mw; ++ky) {
          const double f = p.weight_c[static_cast<std::size_t>(ky)] * norm;
          const double* c = p.cos_c.data() + static_cast<std::size_t>(ky) * g.w;
          const double* s = p.sin_c.data() + static_cast<std::size_t>(ky) * g.w;
          double sr = 0.0;
          double si = 0.0;
          for (int y = 0; y < g.w; ++y) {
            sr += row[y] * c[y];
            si -= row[y] * s[y];
          }
          gbr[static_cast<std::size_t>(x) * mw + ky] = f * sr;
          gbi[static_cast<std::size_t>(x) * mw + ky] = f * si;
        }
      }
      double* outr = gyre.data() + static_cast<std::size_t>(bo) * modes;
      double* outi = gyim.data() + static_cast<std::size_t>(bo) * modes;
      for (int slot = 0; slot < p.rows; ++slot) {
        const bool used = p.used[static_cast<std::size_t>(slot)];
        for (int ky = 0; ky < mw; ++ky) {
          double sr = 0.0;
          double si = 0.0;
          if (used) {
            for (int x = 0; x < g.h; ++x) {
              const double c = p.cos_r[static_cast<std::size_t>(slot) * g.h + x];
              const double s = p.sin_r[static_cast<std::size_t>(slot) * g.h + x];
              const double br = gbr[static_cast<std::size_t>(x) * mw + ky];
              const double bi = gbi[static_cast<std::size_t>(x) * mw + ky];
              // (br + i bi)(cos - i sin)
              sr += br * c + bi * s;
              si += bi * c - br * s;
            }
          }
          outr[static_cast<std::size_t>(slot) * mw + ky] = sr;
          outi[static_cast<std::size_t>(slot) * mw + ky] = si;
        }
      }
    }
  }

  // Weight gradient: GW[i,o] += sum_b GY[b,o] * conj(X[b,i]).
#pragma omp parallel for schedule(static)
  for (int io = 0; io < g.in_c * g.out_c; ++io) {
    const int i = io / g.out_c;
    const int o = io % g.out_c;
    double* wr = grad_weight_re.data() + static_cast<std::size_t>(io) * modes;
    double* wi = grad_weight_im.data() + static_cast<std::size_t>(io) * modes;
    for (int b = 0; b < g.batch; ++b) {
      const double* ar = xre.data() + (static_cast<std::size_t>(b) * g.in_c + i) * modes;
      const double* ai = xim.data() + (static_cast<std::size_t>(b) * g.in_c + i) * modes;
      const double* yr = gyre.data() + (static_cast<std::size_t>(b) * g.out_c + o) * modes;
      const double* yi = gyim.data() + (static_cast<std::size_t>(b) * g.out_c + o) * modes;
      for (std::size_t k = 0; k < modes; ++k) {
        wr[k] += yr[k] * ar[k] + yi[k] * ai[k];
        wi[k] += yi[k] * ar[k] - yr[k] * ai[k];
      }
    }
  }

  // Input gradient: GX[b,i] = sum_o GY[b,o] * conj(W[i,o]), then back through the transform.
#pragma omp parallel
  {
    std::vector<double> gxr(modes), gxi(modes);
    std::vector<double> gar(static_cast<std::size_t>(g.h) * mw), gai(gar.size());
#pragma omp for schedule(static)
    for (int bi = 0; bi < g.batch * g.in_c; ++bi) {
      const int b = bi / g.in_c;
      const int i = bi % g.in_c;
      std::fill(gxr.begin(), gxr.end(), 0.0);
      std::fill(gxi.begin(), gxi.end(), 0.0);
      for (int o = 0; o < g.out_c; ++o) {
        const double* yr = gyre.data() + (static_cast<std::size_t>(b) * g.out_c + o) * modes;
        const double* yi = gyim.data() + (static_cast<std::size_t>(b) * g.out_c + o) * modes;
        const double* wr = weight_re.data() + (static_cast<std::size_t>(i) * g.out_c + o) * modes;
        const double* wi = weight_im.data() + (static_cast<std::size_t>(i) * g.out_c + o) * modes;
        for (std::size_t k = 0; k < modes; ++k) {
          gxr[k] += yr[k] * wr[k] + yi[k] * wi[k];
          gxi[k] += yi[k] * wr[k] - yr[k] * wi[k];
        }
      }
      // GA[x][ky] = sum_slot GX e^{+i phi}
      for (int x = 0; x < g.h; ++x) {
        for (int ky = 0; ky < mw; ++ky) {
          double sr = 0.0;
          double si = 0.0;
          for (int slot = 0; slot < p.rows; ++slot) {
            if (!p.used[static_cast<std::size_t>(slot)]) continue;
            const double c = p.cos_r[static_cast<std::size_t>(slot) * g.h + x];
            const double s = p.sin_r[static_cast<std::size_t>(slot) * g.h + x];
            const double xr = gxr[static_cast<std::size_t>(slot) * mw + ky];
            const double xi = gxi[static_cast<std::size_t>(slot) * mw + ky];
            sr += xr * c - xi * s;
            si += xr * s + xi * c;
          }
          gar[static_cast<std::size_t>(x) * mw + ky] = sr;
          gai[static_cast<std::size_t>(x) * mw + ky] = si;
        }
      }
      double* dst = grad_input.data() + static_cast<std::size_t>(bi) * plane;
      for (int x = 0; x < g.h; ++x) {
        double* row = dst + static_cast<std::size_t>(x) * g.w;
        for (int ky = 0; ky < mw; ++ky) {
          const double ar = gar[static_cast<std::size_t>(x) * mw + ky];
          const double ai = gai[static_cast<std::size_t>(x) * mw + ky];
          const double* c = p.cos_c.data() + static_cast<std::size_t>(ky) * g.w;
          const double* s = p.sin_c.data() + static_cast<std::size_t>(ky) * g.w;
          for (int y = 0; y < g.w; ++y) row[y] += ar * c[y] - ai * s[y];
        }
      }
    }
  }
}

}  // namespace rdstack::nn::kernels
