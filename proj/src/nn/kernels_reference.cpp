#include <cmath>
#include <complex>
#include <numbers>

#include "rdstack/nn/kernels.hpp"

namespace rdstack::nn::kernels::reference {

namespace {

std::size_t idx4(int a, int b, int c, int d, int nb, int nc, int nd) {
  return ((static_cast<std::size_t>(a) * nb + b) * nc + c) * nd + d;
}

}  // namespace

void conv2d_forward(const ConvGeometry& g, std::span<const double> input, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> output) {
  const int oh_n = g.out_h();
  const int ow_n = g.out_w();
  const int icg = g.in_c / g.groups;
  const int ocg = g.out_c / g.groups;
  for (int b = 0; b < g.batch; ++b) {
    for (int o = 0; o < g.out_c; ++o) {
      const int grp = o / ocg;
      for (int oh = 0; oh < oh_n; ++oh) {
        for (int ow = 0; ow < ow_n; ++ow) {
          double acc = bias.empty() ? 0.0 : bias[static_cast<std::size_t>(o)];
          for (int icl = 0; icl < icg; ++icl) {
            const int ic = grp * icg + icl;
            for (int kh = 0; kh < g.k_h; ++kh) {
              for (int kw = 0; kw < g.k_w; ++kw) {
                const int ih = oh * g.stride - g.pad_h + kh * g.dilation;
                const int iw = ow * g.stride - g.pad_w + kw * g.dilation;
                if (ih < 0 || iw < 0 || ih >= g.in_h || iw >= g.in_w) continue;
                acc += weight[idx4(o, icl, kh, kw, icg, g.k_h, g.k_w)] *
                       input[idx4(b, ic, ih, iw, g.in_c, g.in_h, g.in_w)];
              }
            }
          }
          output[idx4(b, o, oh, ow, g.out_c, oh_n, ow_n)] = acc;
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
  for (int b = 0; b < g.batch; ++b) {
    for (int o = 0; o < g.out_c; ++o) {
      const int grp = o / ocg;
      for (int oh = 0; oh < oh_n; ++oh) {
        for (int ow = 0; ow < ow_n; ++ow) {
          const double go = grad_output[idx4(b, o, oh, ow, g.out_c, oh_n, ow_n)];
          for (int icl = 0; icl < icg; ++icl) {
            const int ic = grp * icg + icl;
            for (int kh = 0; kh < g.k_h; ++kh) {
              for (int kw = 0; kw < g.k_w; ++kw) {
                const int ih = oh * g.stride - g.pad_h + kh * g.dilation;
                const int iw = ow * g.stride - g.pad_w + kw * g.dilation;
                if (ih < 0 || iw < 0 || ih >= g.in_h || iw >= g.in_w) continue;
                grad_input[idx4(b, ic, ih, iw, g.in_c, g.in_h, g.in_w)] +=
                    go * weight[idx4(o, icl, kh, kw, icg, g.k_h, g.k_w)];
              }
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
  for (int b = 0; b < g.batch; ++b) {
    for (int o = 0; o < g.out_c; ++o) {
      const int grp = o / ocg;
      for (int oh = 0; oh < oh_n; ++oh) {
        for (int ow = 0; ow < ow_n; ++ow) {
          const double go = grad_output[idx4(b, o, oh, ow, g.out_c, oh_n, ow_n)];
          if (!grad_bias.empty()) grad_bias[static_cast<std::size_t>(o)] += go;
          for (int icl = 0; icl < icg; ++icl) {
            const int ic = grp * icg + icl;
            for (int kh = 0; kh < g.k_h; ++kh) {
              for (int kw = 0; kw < g.k_w; ++kw) {
                const int ih = oh * g.stride - g.pad_h + kh * g.dilation;
                const int iw = ow * g.stride - g.pad_w + kw * g.dilation;
                if (ih < 0 || iw < 0 || ih >= g.in_h || iw >= g.in_w) continue;
                grad_weight[idx4(o, icl, kh, kw, icg, g.k_h, g.k_w)] +=
                    go * input[idx4(b, ic, ih, iw, g.in_c, g.in_h, g.in_w)];
              }
            }
          }
        }
      }
    }
  }
}

void spectral_forward(const SpectralGeometry& g, std::span<const double> input, std::span<const double> weight_re,
                      std::span<const double> weight_im, std::span<double> output) {
  using cd = std::complex<double>;
  const double two_pi = 2.0 * std::numbers::pi;
  const int rows = g.weight_rows();
  const int mw = g.modes_w;

  // Row frequencies in slot order, skipping aliases of an earlier slot.
  std::vector<int> row_freq;
  std::vector<int> slot_of;
  for (int s = 0; s < rows; ++s) {
    const int r = (((s - (g.modes_h - 1)) % g.h) + g.h) % g.h;
    bool seen = false;
    for (int q : row_freq) seen = seen || q == r;
    if (seen) continue;
    row_freq.push_back(r);
    slot_of.push_back(s);
  }

  for (int b = 0; b < g.batch; ++b) {
    std::vector<cd> spec(static_cast<std::size_t>(g.in_c) * row_freq.size() * mw);
    for (int i = 0; i < g.in_c; ++i) {
      for (std::size_t k = 0; k < row_freq.size(); ++k) {
        for (int ky = 0; ky < mw; ++ky) {
          cd acc = 0.0;
          for (int x = 0; x < g.h; ++x) {
            for (int y = 0; y < g.w; ++y) {
              const double angle = two_pi * (static_cast<double>(row_freq[k]) * x / g.h + static_cast<double>(ky) * y / g.w);
              acc += input[idx4(b, i, x, y, g.in_c, g.h, g.w)] * std::polar(1.0, -angle);
            }
          }
          spec[(static_cast<std::size_t>(i) * row_freq.size() + k) * mw + ky] = acc;
        }
      }
    }
    for (int o = 0; o < g.out_c; ++o) {
      for (int x = 0; x < g.h; ++x) {
        for (int y = 0; y < g.w; ++y) {
          double acc = 0.0;
          for (std::size_t k = 0; k < row_freq.size(); ++k) {
            for (int ky = 0; ky < mw; ++ky) {
              cd mixed = 0.0;
              for (int i = 0; i < g.in_c; ++i) {
                const std::size_t widx = idx4(i, o, slot_of[k], ky, g.out_c, rows, mw);
                mixed += spec[(static_cast<std::size_t>(i) * row_freq.size() + k) * mw + ky] *
                         cd(weight_re[widx], weight_im[widx]);
              }
              const double angle = two_pi * (static_cast<double>(row_freq[k]) * x / g.h + static_cast<double>(ky) * y / g.w);
              const double mult = (ky == 0 || (g.w % 2 == 0 && ky == g.w / 2)) ? 1.0 : 2.0;
              acc += mult * (mixed * std::polar(1.0, angle)).real();
            }
          }
          output[idx4(b, o, x, y, g.out_c, g.h, g.w)] = acc / (static_cast<double>(g.h) * g.w);
        }
      }
    }
  }
}

}  // namespace rdstack::nn::kernels::reference
