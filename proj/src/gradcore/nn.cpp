#include "dnagen/gradcore/nn.hpp"

#include <array>
#include <map>

#include "dnagen/error.hpp"

namespace dnagen::ad {

namespace {

IndexMap make_index(std::vector<std::int32_t> idx) {
  return std::make_shared<const std::vector<std::int32_t>>(std::move(idx));
}

// Gather map for the padded window unfold, cached per geometry.
IndexMap unfold_index(std::size_t b, std::size_t l, std::size_t c, std::size_t k, PadSpec pad) {
  using Key = std::array<std::size_t, 6>;
  thread_local std::map<Key, IndexMap> cache;
  const Key key{b, l, c, k, pad.left, pad.right};
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  const std::size_t lo = l + pad.left + pad.right - k + 1;
  std::vector<std::int32_t> idx(b * lo * k * c);
  std::size_t o = 0;
  for (std::size_t bi = 0; bi < b; ++bi) {
    for (std::size_t p = 0; p < lo; ++p) {
      for (std::size_t kk = 0; kk < k; ++kk) {
        const std::size_t q = p + kk;
        const bool inside = q >= pad.left && q < pad.left + l;
        for (std::size_t ci = 0; ci < c; ++ci) {
          idx[o++] = inside ? static_cast<std::int32_t>((bi * l + (q - pad.left)) * c + ci) : -1;
        }
      }
    }
  }
  if (cache.size() >= 64) cache.clear();
  return cache.emplace(key, make_index(std::move(idx))).first->second;
}

// Returns x viewed as [B, L, C] and whether a batch axis was added.
std::pair<Var, bool> as_batched(Var x) {
  const Shape& s = x.shape();
  if (s.size() == 3) return {x, false};
  if (s.size() == 2) return {reshape(x, {1, s[0], s[1]}), true};
  throw DimensionError("expected [L, C] or [B, L, C], got " + to_string(s));
}

Var unbatch(Var y, bool added) {
  if (!added) return y;
  Shape s(y.shape().begin() + 1, y.shape().end());
  return reshape(y, std::move(s));
}

}  // namespace

Var linear(Var x, Var weight, Var bias) {
  const Shape& ws = weight.shape();
  if (ws.size() != 2 || bias.shape() != Shape{ws[1]})
    throw DimensionError("linear: weight " + to_string(ws) + " / bias " +
                         to_string(bias.shape()) + " do not conform");
  const Shape& xs = x.shape();
  if (xs.size() == 1) {
    if (xs[0] != ws[0]) throw DimensionError("linear: input " + to_string(xs) + " vs weight " + to_string(ws));
    Var y = matmul(reshape(x, {1, xs[0]}), weight);
    return add(reshape(y, {ws[1]}), bias);
  }
  if (xs.size() != 2 || xs[1] != ws[0])
    throw DimensionError("linear: input " + to_string(xs) + " vs weight " + to_string(ws));
  return add(matmul(x, weight), broadcast_rows(bias, xs[0]));
}

Var conv1d(Var x, Var filters, PadSpec pad) {
  auto [xb, added] = as_batched(x);
  const Shape& xs = xb.shape();
  const Shape& fs = filters.shape();
  if (fs.size() != 3) throw DimensionError("conv1d: filters must be [K, C_in, C_out]");
  const std::size_t b = xs[0], l = xs[1], c = xs[2];
  const std::size_t k = fs[0], cout = fs[2];
  if (fs[1] != c)
    throw DimensionError("conv1d: input channels " + std::to_string(c) + " vs filters " +
                         to_string(fs));
  const std::size_t lp = l + pad.left + pad.right;
  if (k == 0 || k > lp)
    throw DimensionError("conv1d: filter length " + std::to_string(k) +
                         " exceeds padded length " + std::to_string(lp));
  const std::size_t lo = lp - k + 1;
  const std::size_t row = k * c;

  // Unfold padded windows into rows of a [B * L', K * C] matrix.
  Var cols = gather(xb, unfold_index(b, l, c, k, pad), {b * lo, row}, pad.value);
  Var y = matmul(cols, reshape(filters, {row, cout}));
  return unbatch(reshape(y, {b, lo, cout}), added);
}

Var conv1d(Var x, Var filters, Var bias, PadSpec pad) {
  const Shape& fs = filters.shape();
  if (fs.size() != 3 || bias.shape() != Shape{fs[2]})
    throw DimensionError("conv1d: bias " + to_string(bias.shape()) + " vs filters " +
                         to_string(fs));
  Var y = conv1d(x, filters, pad);
  const Shape ys = y.shape();
  const std::size_t rows = y.size() / fs[2];
  Var flat = add(reshape(y, {rows, fs[2]}), broadcast_rows(bias, rows));
  return reshape(flat, ys);
}

Var softmax_channels(Var x) {
  if (x.shape().empty() || x.shape().back() != 4)
    throw DimensionError("softmax_channels needs a trailing axis of 4, got " +
                         to_string(x.shape()));
  return softmax_last(x);
}

Var max_over_length(Var x) {
  auto [xb, added] = as_batched(x);
  const Shape& s = xb.shape();
  const std::size_t b = s[0], l = s[1], c = s[2];
  if (l == 0) throw DimensionError("max over an empty length axis");
  const auto v = xb.value().data();
  std::vector<std::int32_t> idx(b * c);
  for (std::size_t bi = 0; bi < b; ++bi) {
    for (std::size_t ci = 0; ci < c; ++ci) {
      std::size_t best = (bi * l) * c + ci;
      for (std::size_t p = 1; p < l; ++p) {
        const std::size_t j = (bi * l + p) * c + ci;
        if (v[j] > v[best]) best = j;
      }
      idx[bi * c + ci] = static_cast<std::int32_t>(best);
    }
  }
  Var y = gather(xb, make_index(std::move(idx)), {b, c});
  return added ? reshape(y, {c}) : y;
}

Var mean_over_length(Var x) {
  auto [xb, added] = as_batched(x);
  const Shape& s = xb.shape();
  const std::size_t b = s[0], l = s[1], c = s[2];
  if (l == 0) throw DimensionError("mean over an empty length axis");
  std::vector<std::int32_t> idx(xb.size());
  for (std::size_t bi = 0; bi < b; ++bi)
    for (std::size_t p = 0; p < l; ++p)
      for (std::size_t ci = 0; ci < c; ++ci)
        idx[(bi * l + p) * c + ci] = static_cast<std::int32_t>(bi * c + ci);
  Var y = scale(scatter_add(xb, make_index(std::move(idx)), {b, c}),
                1.0 / static_cast<double>(l));
  return added ? reshape(y, {c}) : y;
}

Var pool_concat(Var x) { return concat_last(max_over_length(x), mean_over_length(x)); }

Var resblock(Var x, const ResBlockParams& p, double r) {
  const Shape& xs = x.shape();
  if (xs.size() < 2) throw DimensionError("resblock needs [L, C] or [B, L, C]");
  const std::size_t c = xs.back();
  for (Var f : {p.filters1, p.filters2}) {
    const Shape& fs = f.shape();
    if (fs.size() != 3 || fs[1] != c || fs[2] != c)
      throw DimensionError("resblock: filters " + to_string(fs) + " do not preserve " +
                           std::to_string(c) + " channels");
  }
  const PadSpec pad = PadSpec::same(p.filters1.shape()[0]);
  Var h = conv1d(relu(x), p.filters1, p.bias1, pad);
  h = conv1d(relu(h), p.filters2, p.bias2, PadSpec::same(p.filters2.shape()[0]));
  if (h.shape() != xs) throw DimensionError("resblock: even filter length changes L");
  return add(x, scale(h, r));
}

}  // namespace dnagen::ad
