#include "semamba/ssm/selective_scan.hpp"

#include <cmath>
#include <vector>

#include <ATen/Parallel.h>
#include <Eigen/Core>

#include "semamba/error.hpp"

namespace semamba::ssm {

namespace {

// Scratch buffers share the vector alignment of tensor storage. With malloc's
// weaker alignment the compiler's peeled prologue would vary with heap layout,
// and so would the summation order of the simd reductions below.
template <typename T>
using Buffer = std::vector<T, Eigen::aligned_allocator<T>>;

struct ScanShape {
  int64_t batch = 0;
  int64_t groups = 0;
  int64_t channels = 0;  // G * Dg
  int64_t per_group = 0;
  int64_t length = 0;
  int64_t state = 0;
};

ScanShape check_shapes(const torch::Tensor& u, const torch::Tensor& delta, const torch::Tensor& A,
                       const torch::Tensor& B, const torch::Tensor& C, const torch::Tensor& D) {
  if (u.dim() != 3) throw ShapeError("selective_scan: u must be (batch, channels, L)");
  if (!delta.sizes().equals(u.sizes())) {
    throw ShapeError("selective_scan: delta shape must equal u shape");
  }
  ScanShape s;
  s.batch = u.size(0);
  s.channels = u.size(1);
  s.length = u.size(2);
  if (s.length < 1) throw DomainError("selective_scan: sequence length must be >= 1");
  if (A.dim() != 2 || A.size(0) != s.channels) {
    throw ShapeError("selective_scan: A must be (channels, N)");
  }
  s.state = A.size(1);
  if (B.dim() != 4 || B.size(0) != s.batch || B.size(2) != s.state || B.size(3) != s.length) {
    throw ShapeError("selective_scan: B must be (batch, groups, N, L)");
  }
  if (!C.sizes().equals(B.sizes())) throw ShapeError("selective_scan: C shape must equal B shape");
  s.groups = B.size(1);
  if (s.groups < 1 || s.channels % s.groups != 0) {
    throw ShapeError("selective_scan: channels must be a multiple of groups");
  }
  s.per_group = s.channels / s.groups;
  if (D.defined() && (D.dim() != 1 || D.size(0) != s.channels)) {
    throw ShapeError("selective_scan: D must be (channels)");
  }
  const auto dtype = u.scalar_type();
  for (const auto* t : {&delta, &A, &B, &C}) {
    if (t->scalar_type() != dtype) throw ShapeError("selective_scan: dtype mismatch");
  }
  if (D.defined() && D.scalar_type() != dtype) throw ShapeError("selective_scan: dtype mismatch");
  return s;
}

// Discretized input weight b_bar / B and its partial derivatives with respect
// to delta and A, for one diagonal entry of the exact hold.
template <typename T>
struct InputWeight {
  T scale;     // b_bar = scale * B
  T d_delta;   // d scale / d delta
  T d_a;       // d scale / d A
};

template <typename T>
inline InputWeight<T> exact_input_weight(T d, T a, T decay) {
  const T z = d * a;
  if (std::abs(z) < T(1e-4)) {
    // Series of expm1(z)/a around z = 0.
    const T scale = d * (T(1) + z / T(2) + z * z / T(6));
    const T da = d * d * (T(0.5) + z / T(3) + z * z / T(8));
    return {scale, decay, da};
  }
  const T e = std::expm1(z);
  return {e / a, decay, (d * decay * a - e) / (a * a)};
}

// Per-channel tables over (L, N), row-major: decay = exp(delta_l a_n) and,
// for the exact hold, the input weight and its derivatives.
template <typename T>
struct ChannelTables {
  Buffer<T> decay, scale, d_delta, d_a;

  ChannelTables(int64_t length, int64_t state, bool exact)
      : decay(static_cast<std::size_t>(length * state)) {
    if (exact) {
      scale.resize(decay.size());
      d_delta.resize(decay.size());
      d_a.resize(decay.size());
    }
  }

  void fill(const T* delta, const T* a, int64_t length, int64_t state, bool exact) {
    for (int64_t l = 0; l < length; ++l) {
      T* row = decay.data() + l * state;
      for (int64_t n = 0; n < state; ++n) row[n] = delta[l] * a[n];
    }
    // Vectorized exponential over the whole table.
    Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>> table(decay.data(),
                                                        static_cast<Eigen::Index>(decay.size()));
    table = table.exp();
    if (!exact) return;
    for (int64_t l = 0; l < length; ++l) {
      for (int64_t n = 0; n < state; ++n) {
        const int64_t ln = l * state + n;
        const auto w = exact_input_weight(delta[l], a[n], decay[ln]);
        scale[ln] = w.scale;
        d_delta[ln] = w.d_delta;
        d_a[ln] = w.d_a;
      }
    }
  }
};

template <typename T, bool Exact>
void scan_forward(const ScanShape& s, const T* u, const T* delta, const T* A, const T* Bt,
                  const T* Ct, const T* D, T* y) {
  at::parallel_for(0, s.batch * s.channels, 1, [&](int64_t begin, int64_t end) {
    Buffer<T> h(static_cast<std::size_t>(s.state));
    ChannelTables<T> tab(s.length, s.state, Exact);
    const int64_t N = s.state;
    for (int64_t bc = begin; bc < end; ++bc) {
      const int64_t b = bc / s.channels;
      const int64_t c = bc % s.channels;
      const int64_t g = c / s.per_group;
      const T* uu = u + bc * s.length;
      const T* dd = delta + bc * s.length;
      const T* bb = Bt + (b * s.groups + g) * s.length * N;
      const T* cc = Ct + (b * s.groups + g) * s.length * N;
      const T skip = D ? D[c] : T(0);
      T* yy = y + bc * s.length;
      tab.fill(dd, A + c * N, s.length, N, Exact);
      T* hp = h.data();
      std::fill(h.begin(), h.end(), T(0));
      for (int64_t l = 0; l < s.length; ++l) {
        const T x = uu[l];
        const T* dec = tab.decay.data() + l * N;
        const T* br = bb + l * N;
        const T* cr = cc + l * N;
        T acc = 0;
        if constexpr (Exact) {
          const T* sc = tab.scale.data() + l * N;
#pragma omp simd reduction(+ : acc)
          for (int64_t n = 0; n < N; ++n) {
            hp[n] = dec[n] * hp[n] + sc[n] * br[n] * x;
            acc += cr[n] * hp[n];
          }
        } else {
          const T dx = dd[l] * x;
#pragma omp simd reduction(+ : acc)
          for (int64_t n = 0; n < N; ++n) {
            hp[n] = dec[n] * hp[n] + br[n] * dx;
            acc += cr[n] * hp[n];
          }
        }
        yy[l] = acc + skip * x;
      }
    }
  });
}

template <typename T>
struct ScanGrads {
  T* u;
  T* delta;
  T* A;  // per-batch buffer (batch, channels, N)
  T* B;  // (batch, G, L, N)
  T* C;  // (batch, G, L, N)
  T* D;  // per-batch buffer (batch, channels)
};

template <typename T, bool Exact>
void scan_backward(const ScanShape& s, const T* u, const T* delta, const T* A, const T* Bt,
                   const T* Ct, const T* D, const T* gy, ScanGrads<T> out) {
  // One task per (batch, group): gradients of the shared B/C rows are then
  // written by a single task.
  at::parallel_for(0, s.batch * s.groups, 1, [&](int64_t begin, int64_t end) {
    const int64_t N = s.state;
    // Row 0 holds the zero initial state, row l + 1 the state after step l.
    Buffer<T> states(static_cast<std::size_t>((s.length + 1) * N), T(0));
    Buffer<T> gh(static_cast<std::size_t>(N));
    Buffer<T> h(static_cast<std::size_t>(N));
    ChannelTables<T> tab(s.length, N, Exact);
    for (int64_t bg = begin; bg < end; ++bg) {
      const int64_t b = bg / s.groups;
      const int64_t g = bg % s.groups;
      const T* bb = Bt + bg * s.length * N;
      const T* cc = Ct + bg * s.length * N;
      T* gB = out.B + bg * s.length * N;
      T* gC = out.C + bg * s.length * N;
      for (int64_t cl = 0; cl < s.per_group; ++cl) {
        const int64_t c = g * s.per_group + cl;
        const int64_t bc = b * s.channels + c;
        const T* uu = u + bc * s.length;
        const T* dd = delta + bc * s.length;
        const T* aa = A + c * N;
        const T* gyy = gy + bc * s.length;
        const T skip = D ? D[c] : T(0);
        T* gA = out.A + bc * N;
        tab.fill(dd, aa, s.length, N, Exact);

        // Recompute the hidden states of this channel.
        T* hp = h.data();
        std::fill(h.begin(), h.end(), T(0));
        for (int64_t l = 0; l < s.length; ++l) {
          const T* dec = tab.decay.data() + l * N;
          const T* br = bb + l * N;
          T* st = states.data() + (l + 1) * N;
          const T x = uu[l];
          if constexpr (Exact) {
            const T* sc = tab.scale.data() + l * N;
#pragma omp simd
            for (int64_t n = 0; n < N; ++n) {
              hp[n] = dec[n] * hp[n] + sc[n] * br[n] * x;
              st[n] = hp[n];
            }
          } else {
            const T dx = dd[l] * x;
#pragma omp simd
            for (int64_t n = 0; n < N; ++n) {
              hp[n] = dec[n] * hp[n] + br[n] * dx;
              st[n] = hp[n];
            }
          }
        }

        T* ghp = gh.data();
        std::fill(gh.begin(), gh.end(), T(0));
        T g_skip = 0;
        for (int64_t l = s.length - 1; l >= 0; --l) {
          const T x = uu[l];
          const T d = dd[l];
          const T go = gyy[l];
          g_skip += go * x;
          const T* dec = tab.decay.data() + l * N;
          const T* st = states.data() + (l + 1) * N;
          const T* prev = st - N;
          const T* br = bb + l * N;
          const T* cr = cc + l * N;
          T* gBr = gB + l * N;
          T* gCr = gC + l * N;
          T gx = 0;
          T gd = 0;
          if constexpr (Exact) {
            const T* sc = tab.scale.data() + l * N;
            const T* sdd = tab.d_delta.data() + l * N;
            const T* sda = tab.d_a.data() + l * N;
#pragma omp simd reduction(+ : gx, gd)
            for (int64_t n = 0; n < N; ++n) {
              ghp[n] += go * cr[n];
              gCr[n] += go * st[n];
              const T g_in = ghp[n] * x;  // dL / d b_bar
              const T g_decay = ghp[n] * prev[n];
              gx += ghp[n] * sc[n] * br[n];
              gd += g_decay * aa[n] * dec[n] + g_in * br[n] * sdd[n];
              gA[n] += g_decay * d * dec[n] + g_in * br[n] * sda[n];
              gBr[n] += g_in * sc[n];
              ghp[n] *= dec[n];
            }
          } else {
#pragma omp simd reduction(+ : gx, gd)
            for (int64_t n = 0; n < N; ++n) {
              ghp[n] += go * cr[n];
              gCr[n] += go * st[n];
              const T g_in = ghp[n] * x;
              const T g_decay = ghp[n] * prev[n];
              const T gdec = g_decay * dec[n];
              gx += ghp[n] * br[n];
              gd += gdec * aa[n] + g_in * br[n];
              gA[n] += gdec * d;
              gBr[n] += g_in * d;
              ghp[n] *= dec[n];
            }
            gx *= d;
          }
          out.u[bc * s.length + l] = gx + go * skip;
          out.delta[bc * s.length + l] = gd;
        }
        out.D[bc] = g_skip;
      }
    }
  });
}

class SelectiveScanFunction : public torch::autograd::Function<SelectiveScanFunction> {
 public:
  static torch::Tensor forward(torch::autograd::AutogradContext* ctx, const torch::Tensor& u,
                               const torch::Tensor& delta, const torch::Tensor& A,
                               const torch::Tensor& B, const torch::Tensor& C,
                               const torch::Tensor& D, bool exact) {
    const auto s = check_shapes(u, delta, A, B, C, D);
    auto uc = u.contiguous();
    auto dc = delta.contiguous();
    auto ac = A.contiguous();
    auto bt = B.transpose(2, 3).contiguous();
    auto ct = C.transpose(2, 3).contiguous();
    auto dsk = D.defined() ? D.contiguous() : torch::Tensor();
    auto y = torch::empty_like(uc);
    AT_DISPATCH_FLOATING_TYPES(uc.scalar_type(), "selective_scan_forward", [&] {
      auto* run = exact ? &scan_forward<scalar_t, true> : &scan_forward<scalar_t, false>;
      run(s, uc.data_ptr<scalar_t>(), dc.data_ptr<scalar_t>(), ac.data_ptr<scalar_t>(),
          bt.data_ptr<scalar_t>(), ct.data_ptr<scalar_t>(),
          dsk.defined() ? dsk.data_ptr<scalar_t>() : nullptr, y.data_ptr<scalar_t>());
    });
    ctx->save_for_backward({uc, dc, ac, bt, ct, dsk});
    ctx->saved_data["exact"] = exact;
    ctx->saved_data["has_d"] = D.defined();
    return y;
  }

  static torch::autograd::variable_list backward(torch::autograd::AutogradContext* ctx,
                                                 torch::autograd::variable_list grads) {
    auto saved = ctx->get_saved_variables();
    const auto& uc = saved[0];
    const auto& dc = saved[1];
    const auto& ac = saved[2];
    const auto& bt = saved[3];
    const auto& ct = saved[4];
    const bool has_d = ctx->saved_data["has_d"].toBool();
    const auto dsk = has_d ? saved[5] : torch::Tensor();
    const bool exact = ctx->saved_data["exact"].toBool();

    ScanShape s;
    s.batch = uc.size(0);
    s.channels = uc.size(1);
    s.length = uc.size(2);
    s.state = ac.size(1);
    s.groups = bt.size(1);
    s.per_group = s.channels / s.groups;

    auto gy = grads[0].contiguous();
    auto gu = torch::empty_like(uc);
    auto gdelta = torch::empty_like(dc);
    auto gA = torch::zeros({s.batch, s.channels, s.state}, uc.options());
    auto gB = torch::zeros_like(bt);
    auto gC = torch::zeros_like(ct);
    auto gD = torch::zeros({s.batch, s.channels}, uc.options());
    AT_DISPATCH_FLOATING_TYPES(uc.scalar_type(), "selective_scan_backward", [&] {
      ScanGrads<scalar_t> out{gu.data_ptr<scalar_t>(), gdelta.data_ptr<scalar_t>(),
                              gA.data_ptr<scalar_t>(), gB.data_ptr<scalar_t>(),
                              gC.data_ptr<scalar_t>(), gD.data_ptr<scalar_t>()};
      auto* run = exact ? &scan_backward<scalar_t, true> : &scan_backward<scalar_t, false>;
      run(s, uc.data_ptr<scalar_t>(), dc.data_ptr<scalar_t>(), ac.data_ptr<scalar_t>(),
          bt.data_ptr<scalar_t>(), ct.data_ptr<scalar_t>(),
          has_d ? dsk.data_ptr<scalar_t>() : nullptr, gy.data_ptr<scalar_t>(), out);
    });
    return {gu,
            gdelta,
            gA.sum(0),
            gB.transpose(2, 3),
            gC.transpose(2, 3),
            has_d ? gD.sum(0) : torch::Tensor(),
            torch::Tensor()};
  }
};

}  // namespace

torch::Tensor selective_scan(const torch::Tensor& u, const torch::Tensor& delta,
                             const torch::Tensor& A, const torch::Tensor& B,
                             const torch::Tensor& C, const torch::Tensor& D,
                             Discretization mode) {
  check_shapes(u, delta, A, B, C, D);
  // Autograd functions cannot take undefined inputs; a missing skip is a zero skip.
  const auto skip = D.defined() ? D : torch::zeros({u.size(1)}, u.options());
  return SelectiveScanFunction::apply(u, delta, A, B, C, skip, mode == Discretization::Exact);
}

}  // namespace semamba::ssm
