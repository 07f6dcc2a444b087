// src/network.cc

// Copyright 2026 dcsep authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "dcsep/network.h"

#include <cmath>
#include <random>

namespace dcsep {

namespace {

using RowMap = Eigen::Map<RowMatrixXd>;
using ConstRowMap = Eigen::Map<const RowMatrixXd>;

struct BlockOffsets {
  Index wx, wh, b, end;
};

struct Layout {
  std::vector<BlockOffsets> cells;  // index = layer * 2 + direction
  Index wo = 0, bo = 0, total = 0;
};

Layout MakeLayout(const NetworkConfig &c) {
  Layout l;
  const Index gh = static_cast<Index>(c.gates()) * c.hidden;
  Index off = 0;
  for (int layer = 0; layer < c.layers; ++layer) {
    const Index in = layer == 0 ? c.input_dim() : 2 * c.hidden;
    for (int dir = 0; dir < 2; ++dir) {
      BlockOffsets b;
      b.wx = off;
      b.wh = b.wx + gh * in;
      b.b = b.wh + gh * c.hidden;
      b.end = b.b + gh;
      off = b.end;
      l.cells.push_back(b);
    }
  }
  l.wo = off;
  l.bo = l.wo + static_cast<Index>(c.output_dim()) * 2 * c.hidden;
  l.total = l.bo + c.output_dim();
  return l;
}

struct CellView {
  ConstRowMap wx, wh;
  Eigen::Map<const VectorXd> b;
};

CellView ViewCell(const NetworkConfig &c, const VectorXd &theta, const BlockOffsets &o,
                  Index in) {
  const Index gh = static_cast<Index>(c.gates()) * c.hidden;
  return {ConstRowMap(theta.data() + o.wx, gh, in),
          ConstRowMap(theta.data() + o.wh, gh, c.hidden),
          Eigen::Map<const VectorXd>(theta.data() + o.b, gh)};
}

inline double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct CellCache {
  RowMatrixXd act;  // activated gates per step
  RowMatrixXd h;    // outputs
  RowMatrixXd c;    // LSTM cell state
  RowMatrixXd rh;   // GRU r * h_prev
};

// Recurrence over rows of x in order; the reverse direction is handled by
// the caller reversing x.
void CellForward(CellType type, int H, const CellView &w, const RowMatrixXd &x,
                 CellCache *cache) {
  const Index T = x.rows();
  const Index G = w.wh.rows();
  RowMatrixXd a = x * w.wx.transpose();
  a.rowwise() += w.b.transpose();
  cache->act.resize(T, G);
  cache->h.resize(T, H);
  VectorXd hprev = VectorXd::Zero(H);
  if (type == CellType::kGru) {
    cache->rh.resize(T, H);
    const auto whrz = w.wh.topRows(2 * H);
    const auto whn = w.wh.bottomRows(H);
    for (Index t = 0; t < T; ++t) {
      VectorXd rz = a.row(t).head(2 * H).transpose() + whrz * hprev;
      rz = rz.unaryExpr([](double v) { return Sigmoid(v); });
      const auto r = rz.head(H);
      const auto z = rz.tail(H);
      const VectorXd rh = r.cwiseProduct(hprev);
      const VectorXd n =
          (a.row(t).tail(H).transpose() + whn * rh).array().tanh().matrix();
      const VectorXd h = (1.0 - z.array()).matrix().cwiseProduct(n) + z.cwiseProduct(hprev);
      cache->act.row(t) << rz.transpose(), n.transpose();
      cache->rh.row(t) = rh.transpose();
      cache->h.row(t) = h.transpose();
      hprev = h;
    }
  } else {
    cache->c.resize(T, H);
    VectorXd cprev = VectorXd::Zero(H);
    for (Index t = 0; t < T; ++t) {
      VectorXd g = a.row(t).transpose() + w.wh * hprev;
      for (Index k = 0; k < G; ++k)
        g[k] = (k >= 2 * H && k < 3 * H) ? std::tanh(g[k]) : Sigmoid(g[k]);
      const auto i = g.segment(0, H);
      const auto f = g.segment(H, H);
      const auto gg = g.segment(2 * H, H);
      const auto o = g.segment(3 * H, H);
      const VectorXd c = f.cwiseProduct(cprev) + i.cwiseProduct(gg);
      const VectorXd h = o.cwiseProduct(c.array().tanh().matrix());
      cache->act.row(t) = g.transpose();
      cache->c.row(t) = c.transpose();
      cache->h.row(t) = h.transpose();
      hprev = h;
      cprev = c;
    }
  }
}

RowMatrixXd ShiftDown(const RowMatrixXd &m) {
  RowMatrixXd out = RowMatrixXd::Zero(m.rows(), m.cols());
  if (m.rows() > 1) out.bottomRows(m.rows() - 1) = m.topRows(m.rows() - 1);
  return out;
}

// Accumulates weight gradients into grad and returns dL/dx.
RowMatrixXd CellBackward(CellType type, int H, const CellView &w, const RowMatrixXd &x,
                         const CellCache &cache, const RowMatrixXd &dh_out,
                         VectorXd *grad, const BlockOffsets &o) {
  const Index T = x.rows();
  const Index G = w.wh.rows();
  RowMatrixXd da(T, G);
  VectorXd dh_carry = VectorXd::Zero(H);
  if (type == CellType::kGru) {
    const auto whr = w.wh.topRows(H);
    const auto whz = w.wh.middleRows(H, H);
    const auto whn = w.wh.bottomRows(H);
    for (Index t = T - 1; t >= 0; --t) {
      const VectorXd dh = dh_out.row(t).transpose() + dh_carry;
      const VectorXd hprev = t > 0 ? VectorXd(cache.h.row(t - 1).transpose())
                                   : VectorXd::Zero(H);
      const auto r = cache.act.row(t).segment(0, H).transpose();
      const auto z = cache.act.row(t).segment(H, H).transpose();
      const auto n = cache.act.row(t).segment(2 * H, H).transpose();
      const VectorXd dn = dh.cwiseProduct((1.0 - z.array()).matrix());
      const VectorXd dz = dh.cwiseProduct(hprev - n);
      const VectorXd dan = dn.cwiseProduct((1.0 - n.array().square()).matrix());
      const VectorXd drh = whn.transpose() * dan;
      const VectorXd dar =
          drh.cwiseProduct(hprev).cwiseProduct((r.array() * (1.0 - r.array())).matrix());
      const VectorXd daz = dz.cwiseProduct((z.array() * (1.0 - z.array())).matrix());
      dh_carry = dh.cwiseProduct(z) + drh.cwiseProduct(r) + whr.transpose() * dar +
                 whz.transpose() * daz;
      da.row(t) << dar.transpose(), daz.transpose(), dan.transpose();
    }
    const RowMatrixXd hprev = ShiftDown(cache.h);
    RowMap dwh(grad->data() + o.wh, G, H);
    dwh.topRows(2 * H).noalias() += da.leftCols(2 * H).transpose() * hprev;
    dwh.bottomRows(H).noalias() += da.rightCols(H).transpose() * cache.rh;
  } else {
    VectorXd dc_carry = VectorXd::Zero(H);
    for (Index t = T - 1; t >= 0; --t) {
      const VectorXd dh = dh_out.row(t).transpose() + dh_carry;
      const VectorXd cprev = t > 0 ? VectorXd(cache.c.row(t - 1).transpose())
                                   : VectorXd::Zero(H);
      const auto act = cache.act.row(t).transpose();
      const auto i = act.segment(0, H);
      const auto f = act.segment(H, H);
      const auto g = act.segment(2 * H, H);
      const auto og = act.segment(3 * H, H);
      const VectorXd tc = cache.c.row(t).transpose().array().tanh().matrix();
      const VectorXd d_o = dh.cwiseProduct(tc);
      const VectorXd dc =
          dc_carry + dh.cwiseProduct(og).cwiseProduct((1.0 - tc.array().square()).matrix());
      VectorXd a(G);
      a.segment(0, H) = dc.cwiseProduct(g).cwiseProduct((i.array() * (1.0 - i.array())).matrix());
      a.segment(H, H) =
          dc.cwiseProduct(cprev).cwiseProduct((f.array() * (1.0 - f.array())).matrix());
      a.segment(2 * H, H) = dc.cwiseProduct(i).cwiseProduct((1.0 - g.array().square()).matrix());
      a.segment(3 * H, H) =
          d_o.cwiseProduct((og.array() * (1.0 - og.array())).matrix());
      dc_carry = dc.cwiseProduct(f);
      dh_carry = w.wh.transpose() * a;
      da.row(t) = a.transpose();
    }
    RowMap dwh(grad->data() + o.wh, G, H);
    dwh.noalias() += da.transpose() * ShiftDown(cache.h);
  }
  RowMap dwx(grad->data() + o.wx, G, x.cols());
  dwx.noalias() += da.transpose() * x;
  Eigen::Map<VectorXd>(grad->data() + o.b, G) += da.colwise().sum().transpose();
  return da * w.wx;
}

RowMatrixXd Reversed(const RowMatrixXd &m) { return m.colwise().reverse(); }

struct LayerCache {
  RowMatrixXd input;
  CellCache fwd, bwd;
};

struct ForwardState {
  std::vector<LayerCache> layers;
  RowMatrixXd top;  // T x 2H
  RowMatrixXd raw;  // N x D
};

void RunForward(const NetworkParameters &p, const Layout &layout, const RowMatrixXd &input,
                ForwardState *st) {
  const NetworkConfig &c = p.config;
  Require(input.cols() == c.input_dim(),
          "network input width " + std::to_string(input.cols()) + " does not match " +
              std::to_string(c.input_dim()));
  Require(p.theta.size() == layout.total, "network parameter count mismatch");
  st->layers.resize(c.layers);
  RowMatrixXd x = input;
  for (int layer = 0; layer < c.layers; ++layer) {
    LayerCache &lc = st->layers[layer];
    lc.input = x;
    const Index in = x.cols();
    CellForward(c.cell, c.hidden, ViewCell(c, p.theta, layout.cells[2 * layer], in), x,
                &lc.fwd);
    CellForward(c.cell, c.hidden, ViewCell(c, p.theta, layout.cells[2 * layer + 1], in),
                Reversed(x), &lc.bwd);
    RowMatrixXd out(x.rows(), 2 * c.hidden);
    out << lc.fwd.h, Reversed(lc.bwd.h);
    x = std::move(out);
  }
  st->top = x;
  const ConstRowMap wo(p.theta.data() + layout.wo, c.output_dim(), 2 * c.hidden);
  const Eigen::Map<const VectorXd> bo(p.theta.data() + layout.bo, c.output_dim());
  RowMatrixXd flat = x * wo.transpose();
  flat.rowwise() += bo.transpose();
  st->raw = ConstRowMap(flat.data(), flat.rows() * c.freq_bins, c.embedding_dim);
}

}  // namespace

CellType ParseCellType(const std::string &name) {
  if (name == "gru") return CellType::kGru;
  if (name == "lstm") return CellType::kLstm;
  throw Error("unknown recurrent cell '" + name + "'", Error::Kind::kUsage);
}

std::string CellTypeName(CellType cell) { return cell == CellType::kGru ? "gru" : "lstm"; }

Index NetworkParameters::Count(const NetworkConfig &config) {
  return MakeLayout(config).total;
}

NetworkParameters InitNetwork(const NetworkConfig &config, std::uint64_t seed) {
  Require(config.freq_bins > 0 && config.embedding_dim > 0 && config.hidden > 0 &&
              config.layers > 0 && config.ivector_width >= 0,
          "invalid network configuration");
  const Layout layout = MakeLayout(config);
  NetworkParameters p;
  p.config = config;
  p.theta = VectorXd::Zero(layout.total);
  std::mt19937_64 rng(seed);
  auto fill = [&](Index off, Index rows, Index cols) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (Index k = 0; k < rows * cols; ++k) p.theta[off + k] = u(rng);
  };
  const Index H = config.hidden;
  const Index G = static_cast<Index>(config.gates()) * H;
  for (int layer = 0; layer < config.layers; ++layer)
    for (int dir = 0; dir < 2; ++dir) {
      const BlockOffsets &o = layout.cells[2 * layer + dir];
      const Index in = layer == 0 ? config.input_dim() : 2 * H;
      fill(o.wx, G, in);
      fill(o.wh, G, H);
      if (config.cell == CellType::kLstm) p.theta.segment(o.b + H, H).setOnes();
    }
  fill(layout.wo, config.output_dim(), 2 * H);
  return p;
}

NetworkParameters WidenInput(const NetworkParameters &params, int ivector_width) {
  Require(ivector_width >= params.config.ivector_width,
          "cannot narrow the network input");
  NetworkConfig wide = params.config;
  wide.ivector_width = ivector_width;
  const Layout from = MakeLayout(params.config), to = MakeLayout(wide);
  NetworkParameters out;
  out.config = wide;
  out.theta = VectorXd::Zero(to.total);
  const Index G = static_cast<Index>(wide.gates()) * wide.hidden;
  const Index in_old = params.config.input_dim(), in_new = wide.input_dim();
  for (std::size_t k = 0; k < from.cells.size(); ++k) {
    const BlockOffsets &a = from.cells[k], &b = to.cells[k];
    if (k < 2) {
      for (Index r = 0; r < G; ++r)
        out.theta.segment(b.wx + r * in_new, in_old) =
            params.theta.segment(a.wx + r * in_old, in_old);
    } else {
      out.theta.segment(b.wx, a.wh - a.wx) = params.theta.segment(a.wx, a.wh - a.wx);
    }
    out.theta.segment(b.wh, a.end - a.wh) = params.theta.segment(a.wh, a.end - a.wh);
  }
  out.theta.segment(to.wo, to.total - to.wo) =
      params.theta.segment(from.wo, from.total - from.wo);
  return out;
}

RowMatrixXd AssembleInput(const MatrixXd &features, const MatrixXd &ivectors) {
  const Index T = features.rows(), F = features.cols();
  const Index extra = ivectors.size();
  RowMatrixXd x(T, F + extra);
  x.leftCols(F) = features;
  if (extra > 0) {
    // Row-major flattening: slot c occupies [c * dim, (c + 1) * dim).
    const RowMatrixXd iv = ivectors;
    const Eigen::Map<const Eigen::RowVectorXd> flat(iv.data(), extra);
    x.rightCols(extra) = flat.replicate(T, 1);
  }
  return x;
}

RowMatrixXd ForwardRaw(const NetworkParameters &params, const RowMatrixXd &input) {
  ForwardState st;
  RunForward(params, MakeLayout(params.config), input, &st);
  return st.raw;
}

RowMatrixXd Forward(const NetworkParameters &params, const RowMatrixXd &input) {
  return NormalizeRows(ForwardRaw(params, input));
}

RowMatrixXd Forward(const NetworkParameters &params, const MatrixXd &features,
                    const MatrixXd &ivectors) {
  return Forward(params, AssembleInput(features, ivectors));
}

double LossAndGradient(const NetworkParameters &params, const RowMatrixXd &input,
                       const AffinityTarget &target, double scale, VectorXd *grad) {
  const NetworkConfig &c = params.config;
  const Layout layout = MakeLayout(c);
  Require(grad->size() == layout.total, "gradient size mismatch");
  ForwardState st;
  RunForward(params, layout, input, &st);
  Require(target.Y.rows() == st.raw.rows(), "target does not match network output");

  const RowMatrixXd V = NormalizeRows(st.raw);
  const double loss = AffinityLoss(V, target.Y, target.retained);
  RowMatrixXd dU =
      NormalizeRowsBackward(st.raw, AffinityLossGrad(V, target.Y, target.retained)) * scale;

  const Index T = input.rows();
  const ConstRowMap dflat(dU.data(), T, c.output_dim());
  RowMap dwo(grad->data() + layout.wo, c.output_dim(), 2 * c.hidden);
  dwo.noalias() += dflat.transpose() * st.top;
  Eigen::Map<VectorXd>(grad->data() + layout.bo, c.output_dim()) +=
      dflat.colwise().sum().transpose();
  const ConstRowMap wo(params.theta.data() + layout.wo, c.output_dim(), 2 * c.hidden);
  RowMatrixXd dx = dflat * wo;

  for (int layer = c.layers - 1; layer >= 0; --layer) {
    const LayerCache &lc = st.layers[layer];
    const Index in = lc.input.cols();
    const BlockOffsets &of = layout.cells[2 * layer], &ob = layout.cells[2 * layer + 1];
    const RowMatrixXd dh_f = dx.leftCols(c.hidden);
    const RowMatrixXd dh_b = Reversed(dx.rightCols(c.hidden));
    RowMatrixXd dxf = CellBackward(c.cell, c.hidden, ViewCell(c, params.theta, of, in),
                                   lc.input, lc.fwd, dh_f, grad, of);
    RowMatrixXd dxb = CellBackward(c.cell, c.hidden, ViewCell(c, params.theta, ob, in),
                                   Reversed(lc.input), lc.bwd, dh_b, grad, ob);
    dx = dxf + Reversed(dxb);
  }
  return loss * scale;
}

}  // namespace dcsep
