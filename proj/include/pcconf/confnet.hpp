#pragma once

// The confidence model: a small feed-forward net taking one embedding and
// emitting a scalar in (0,1), trained with the loser-takes-all pair loss
//   L(s1, s2, y) = (min(s1, s2) - y)^2
// via hand-written backpropagation. Ties split the subgradient equally;
// the non-minimum branch receives exactly zero gradient.
//
// Training is deliberately plain SGD: mini-batches sample identities
// uniformly and then a pair within the identity (balanced sampling), the
// learning rate decays x10 when the mean epoch loss plateaus (at most
// twice), and everything is driven by seeded streams so a run is a pure
// function of (corpus, config).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pcconf/errors.hpp"
#include "pcconf/hash.hpp"
#include "pcconf/linalg.hpp"
#include "pcconf/rng.hpp"

namespace pcconf {

struct ConfidenceModel {
    // layer_sizes = {d, h1, h2, 1}; W[l] is layer_sizes[l+1] x layer_sizes[l]
    std::vector<std::size_t> layer_sizes;
    std::vector<Mat> W;
    std::vector<Vec> b;

    std::size_t input_dim() const { return layer_sizes.empty() ? 0 : layer_sizes.front(); }
    // Unit-norm inputs have O(1/sqrt(d)) coordinates; the model pre-scales by
    // sqrt(d) so first-layer activations are O(1) at the stock learning rate.
    double input_scale() const { return std::sqrt(static_cast<double>(input_dim())); }
};

inline ConfidenceModel make_model(std::size_t d, std::size_t h1, std::size_t h2,
                                  std::uint64_t seed) {
    ConfidenceModel m;
    m.layer_sizes = {d, h1, h2, 1};
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
        std::size_t fan_in = m.layer_sizes[l], fan_out = m.layer_sizes[l + 1];
        Mat w(fan_out, fan_in);
        double lim = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (double& v : w.a) v = (2.0 * rng.u01() - 1.0) * lim;
        m.W.push_back(std::move(w));
        m.b.push_back(Vec(fan_out, 0.0));
    }
    return m;
}

inline std::uint64_t parameter_checksum(const ConfidenceModel& m) {
    std::uint64_t h = kFnvOffset;
    for (std::size_t l = 0; l < m.W.size(); ++l) {
        h = fnv1a64(m.W[l].a.data(), m.W[l].a.size() * sizeof(double), h);
        h = fnv1a64(m.b[l].data(), m.b[l].size() * sizeof(double), h);
    }
    return h;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double forward(const ConfidenceModel& m, const double* e, std::size_t dim) {
    if (dim != m.input_dim()) throw std::invalid_argument("forward: dimension mismatch");
    double scale = m.input_scale();
    Vec cur(e, e + dim);
    for (double& v : cur) v *= scale;
    for (std::size_t l = 0; l < m.W.size(); ++l) {
        const Mat& W = m.W[l];
        Vec next(W.rows);
        for (std::size_t j = 0; j < W.rows; ++j)
            next[j] = dot(W.row(j), cur.data(), W.cols) + m.b[l][j];
        if (l + 1 < m.W.size())
            for (double& v : next) v = v > 0.0 ? v : 0.0;
        cur = std::move(next);
    }
    return sigmoid(cur[0]);
}

inline double forward(const ConfidenceModel& m, const Vec& e) {
    return forward(m, e.data(), e.size());
}

// ---- loser-takes-all loss ----

inline double lta_loss(double s1, double s2, double y) {
    double d = std::min(s1, s2) - y;
    return d * d;
}

// (dL/ds1, dL/ds2); ties split the subgradient equally
inline std::pair<double, double> lta_loss_gradient(double s1, double s2, double y) {
    if (s1 < s2) return {2.0 * (s1 - y), 0.0};
    if (s2 < s1) return {0.0, 2.0 * (s2 - y)};
    return {s1 - y, s1 - y};
}

// ---- backprop ----

namespace detail {

struct ForwardTrace {
    Vec x;        // scaled input
    Vec a1, a2;   // post-relu activations
    double z3 = 0.0, s = 0.0;
};

inline ForwardTrace forward_trace(const ConfidenceModel& m, const double* e) {
    ForwardTrace t;
    std::size_t d = m.input_dim();
    double scale = m.input_scale();
    t.x.resize(d);
    for (std::size_t i = 0; i < d; ++i) t.x[i] = e[i] * scale;
    const Mat& W0 = m.W[0];
    t.a1.resize(W0.rows);
    for (std::size_t j = 0; j < W0.rows; ++j) {
        double z = dot(W0.row(j), t.x.data(), d) + m.b[0][j];
        t.a1[j] = z > 0.0 ? z : 0.0;
    }
    const Mat& W1 = m.W[1];
    t.a2.resize(W1.rows);
    for (std::size_t j = 0; j < W1.rows; ++j) {
        double z = dot(W1.row(j), t.a1.data(), W1.cols) + m.b[1][j];
        t.a2[j] = z > 0.0 ? z : 0.0;
    }
    t.z3 = dot(m.W[2].row(0), t.a2.data(), m.W[2].cols) + m.b[2][0];
    t.s = sigmoid(t.z3);
    return t;
}

// accumulate parameter gradients for one sample given dL/ds
inline void accumulate_backward(const ConfidenceModel& m, const ForwardTrace& t,
                                double dLds, std::vector<Mat>& gW, std::vector<Vec>& gb) {
    if (dLds == 0.0) return;
    double dz3 = dLds * t.s * (1.0 - t.s);
    // layer 2: 1 x h2
    {
        double* g = gW[2].row(0);
        const double* a2 = t.a2.data();
        for (std::size_t j = 0; j < gW[2].cols; ++j) g[j] += dz3 * a2[j];
        gb[2][0] += dz3;
    }
    std::size_t h2 = m.W[2].cols, h1 = m.W[1].cols, d = m.W[0].cols;
    Vec d2(h2);
    for (std::size_t j = 0; j < h2; ++j)
        d2[j] = t.a2[j] > 0.0 ? dz3 * m.W[2](0, j) : 0.0;
    // layer 1: h2 x h1
    for (std::size_t j = 0; j < h2; ++j) {
        double dj = d2[j];
        if (dj == 0.0) continue;
        double* g = gW[1].row(j);
        const double* a1 = t.a1.data();
        for (std::size_t c = 0; c < h1; ++c) g[c] += dj * a1[c];
        gb[1][j] += dj;
    }
    Vec d1(h1, 0.0);
    for (std::size_t j = 0; j < h2; ++j) {
        double dj = d2[j];
        if (dj == 0.0) continue;
        const double* w = m.W[1].row(j);
        for (std::size_t c = 0; c < h1; ++c) d1[c] += dj * w[c];
    }
    for (std::size_t c = 0; c < h1; ++c)
        if (t.a1[c] <= 0.0) d1[c] = 0.0;
    // layer 0: h1 x d
    for (std::size_t j = 0; j < h1; ++j) {
        double dj = d1[j];
        if (dj == 0.0) continue;
        double* g = gW[0].row(j);
        const double* x = t.x.data();
        for (std::size_t c = 0; c < d; ++c) g[c] += dj * x[c];
        gb[0][j] += dj;
    }
}

} // namespace detail

struct PairGradient {
    std::vector<Mat> gW;
    std::vector<Vec> gb;
    double s1 = 0.0, s2 = 0.0, loss = 0.0;
};

// gradient of L(Phi(e1), Phi(e2), y) w.r.t. every parameter
inline PairGradient backward(const ConfidenceModel& m, const double* e1, const double* e2,
                             double y, std::size_t dim) {
    if (dim != m.input_dim()) throw std::invalid_argument("backward: dimension mismatch");
    PairGradient g;
    for (std::size_t l = 0; l < m.W.size(); ++l) {
        g.gW.emplace_back(m.W[l].rows, m.W[l].cols);
        g.gb.emplace_back(m.b[l].size(), 0.0);
    }
    auto t1 = detail::forward_trace(m, e1);
    auto t2 = detail::forward_trace(m, e2);
    auto [d1, d2] = lta_loss_gradient(t1.s, t2.s, y);
    detail::accumulate_backward(m, t1, d1, g.gW, g.gb);
    detail::accumulate_backward(m, t2, d2, g.gW, g.gb);
    g.s1 = t1.s;
    g.s2 = t2.s;
    g.loss = lta_loss(t1.s, t2.s, y);
    return g;
}

inline PairGradient backward(const ConfidenceModel& m, const Vec& e1, const Vec& e2, double y) {
    if (e1.size() != e2.size()) throw std::invalid_argument("backward: pair dimension mismatch");
    return backward(m, e1.data(), e2.data(), y, e1.size());
}

// ---- training ----

struct TrainConfig {
    std::size_t batch_size = 64;
    double initial_lr = 0.1;
    double decay_factor = 10.0;
    int max_decays = 2;
    int patience = 3;
    double rel_tol = 1e-3;
    int max_epochs = 100;
    std::uint64_t seed = 0;
    // tie gradient policy is fixed: split equally (see lta_loss_gradient)

    void validate() const {
        if (batch_size == 0) throw ConfigError("train: batch_size must be positive");
        if (!(initial_lr > 0.0)) throw ConfigError("train: initial_lr must be positive");
        if (!(decay_factor > 1.0)) throw ConfigError("train: decay_factor must exceed 1");
        if (!(rel_tol > 0.0)) throw ConfigError("train: rel_tol must be positive");
        if (patience <= 0) throw ConfigError("train: patience must be positive");
        if (max_epochs <= 0) throw ConfigError("train: max_epochs must be positive");
    }
};

struct TrainPair {
    std::size_t row_a, row_b;  // rows into the input matrix
    std::uint64_t identity;
    double y;
};

struct LrEvent {
    int epoch;
    double new_lr;
};

struct TrainReport {
    std::vector<double> epoch_loss;
    std::vector<LrEvent> lr_events;
    std::uint64_t final_checksum = 0;
    double wall_seconds = 0.0;  // informational; not part of persisted artifacts
    int epochs = 0;
};

// Batched trainer. Inputs X hold one embedding per row (unscaled); pairs
// index into X. Deterministic given cfg.seed; accumulation order inside a
// batch is fixed regardless of any caller-side threading.
inline TrainReport train(ConfidenceModel& m, const Mat& X, const std::vector<TrainPair>& pairs,
                         const TrainConfig& cfg) {
    cfg.validate();
    if (pairs.empty()) throw std::invalid_argument("train: empty pair corpus");
    if (X.cols != m.input_dim()) throw std::invalid_argument("train: input dimension mismatch");

    // identity -> pair indices, identities in sorted order
    std::vector<std::uint64_t> ident_ids;
    std::vector<std::vector<std::size_t>> ident_pairs;
    {
        std::vector<std::pair<std::uint64_t, std::size_t>> tagged(pairs.size());
        for (std::size_t i = 0; i < pairs.size(); ++i) tagged[i] = {pairs[i].identity, i};
        std::sort(tagged.begin(), tagged.end());
        for (auto& [id, pi] : tagged) {
            if (ident_ids.empty() || ident_ids.back() != id) {
                ident_ids.push_back(id);
                ident_pairs.emplace_back();
            }
            ident_pairs.back().push_back(pi);
        }
    }

    Rng sampler = Rng(cfg.seed).stream("train/sampler");

    const std::size_t d = m.input_dim();
    const std::size_t h1 = m.layer_sizes[1], h2 = m.layer_sizes[2];
    const std::size_t B = cfg.batch_size;
    const double scale = m.input_scale();

    // batch workspaces (two images per pair)
    const std::size_t n2 = 2 * B;
    Mat Xb(n2, d), A1(n2, h1), A2(n2, h2);
    Vec Z3(n2), S(n2), D3(n2);
    Mat D2(n2, h2), D1(n2, h1);
    std::vector<Mat> gW;
    std::vector<Vec> gb;
    for (std::size_t l = 0; l < m.W.size(); ++l) {
        gW.emplace_back(m.W[l].rows, m.W[l].cols);
        gb.emplace_back(m.b[l].size(), 0.0);
    }
    // transposed weight copies for the forward gemm loops
    Mat W0t(d, h1), W1t(h1, h2);
    auto refresh_transposes = [&]() {
        for (std::size_t r = 0; r < h1; ++r)
            for (std::size_t c = 0; c < d; ++c) W0t(c, r) = m.W[0](r, c);
        for (std::size_t r = 0; r < h2; ++r)
            for (std::size_t c = 0; c < h1; ++c) W1t(c, r) = m.W[1](r, c);
    };
    refresh_transposes();

    TrainReport report;
    const std::size_t batches_per_epoch = (pairs.size() + B - 1) / B;
    double lr = cfg.initial_lr;
    double best = 1e300;
    int stall = 0, decays = 0;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        double loss_sum = 0.0;
        for (std::size_t batch = 0; batch < batches_per_epoch; ++batch) {
            // balanced sampling: identity uniform, then pair uniform within
            std::vector<std::size_t> chosen(B);
            for (std::size_t i = 0; i < B; ++i) {
                const auto& plist =
                    ident_pairs[static_cast<std::size_t>(sampler.below(ident_ids.size()))];
                chosen[i] = plist[static_cast<std::size_t>(sampler.below(plist.size()))];
            }
            for (std::size_t i = 0; i < B; ++i) {
                const TrainPair& p = pairs[chosen[i]];
                const double* ea = X.row(p.row_a);
                const double* eb = X.row(p.row_b);
                double* xa = Xb.row(2 * i);
                double* xb = Xb.row(2 * i + 1);
                for (std::size_t c = 0; c < d; ++c) {
                    xa[c] = ea[c] * scale;
                    xb[c] = eb[c] * scale;
                }
            }
            // forward: A1 = relu(Xb W0^T + b0), A2 = relu(A1 W1^T + b1), S = sigmoid(A2 w2 + b2)
            for (std::size_t i = 0; i < n2; ++i) {
                double* a1 = A1.row(i);
                const double* x = Xb.row(i);
                for (std::size_t j = 0; j < h1; ++j) a1[j] = m.b[0][j];
                for (std::size_t k = 0; k < d; ++k) {
                    double xk = x[k];
                    const double* w = W0t.row(k);
                    for (std::size_t j = 0; j < h1; ++j) a1[j] += xk * w[j];
                }
                for (std::size_t j = 0; j < h1; ++j)
                    if (a1[j] < 0.0) a1[j] = 0.0;
                double* a2 = A2.row(i);
                for (std::size_t j = 0; j < h2; ++j) a2[j] = m.b[1][j];
                for (std::size_t k = 0; k < h1; ++k) {
                    double ak = a1[k];
                    if (ak == 0.0) continue;
                    const double* w = W1t.row(k);
                    for (std::size_t j = 0; j < h2; ++j) a2[j] += ak * w[j];
                }
                for (std::size_t j = 0; j < h2; ++j)
                    if (a2[j] < 0.0) a2[j] = 0.0;
                Z3[i] = dot(m.W[2].row(0), a2, h2) + m.b[2][0];
                S[i] = sigmoid(Z3[i]);
            }
            // pair losses and dL/ds
            double batch_loss = 0.0;
            const double invB = 1.0 / static_cast<double>(B);
            for (std::size_t i = 0; i < B; ++i) {
                double y = pairs[chosen[i]].y;
                double sa = S[2 * i], sb = S[2 * i + 1];
                batch_loss += lta_loss(sa, sb, y);
                auto [ga, gbr] = lta_loss_gradient(sa, sb, y);
                D3[2 * i] = ga * invB * S[2 * i] * (1.0 - S[2 * i]);
                D3[2 * i + 1] = gbr * invB * S[2 * i + 1] * (1.0 - S[2 * i + 1]);
            }
            batch_loss *= invB;
            if (!std::isfinite(batch_loss))
                throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                     " batch " + std::to_string(batch));
            loss_sum += batch_loss;

            // zero gradients
            for (std::size_t l = 0; l < gW.size(); ++l) {
                std::fill(gW[l].a.begin(), gW[l].a.end(), 0.0);
                std::fill(gb[l].begin(), gb[l].end(), 0.0);
            }
            // backward
            for (std::size_t i = 0; i < n2; ++i) {
                double dz3 = D3[i];
                if (dz3 == 0.0) continue;
                const double* a2 = A2.row(i);
                double* g2 = gW[2].row(0);
                for (std::size_t j = 0; j < h2; ++j) g2[j] += dz3 * a2[j];
                gb[2][0] += dz3;
                double* dd2 = D2.row(i);
                const double* w2 = m.W[2].row(0);
                for (std::size_t j = 0; j < h2; ++j)
                    dd2[j] = a2[j] > 0.0 ? dz3 * w2[j] : 0.0;
            }
            for (std::size_t i = 0; i < n2; ++i) {
                if (D3[i] == 0.0) continue;
                const double* dd2 = D2.row(i);
                const double* a1 = A1.row(i);
                for (std::size_t j = 0; j < h2; ++j) {
                    double dj = dd2[j];
                    if (dj == 0.0) continue;
                    double* g = gW[1].row(j);
                    for (std::size_t c = 0; c < h1; ++c) g[c] += dj * a1[c];
                    gb[1][j] += dj;
                }
                double* dd1 = D1.row(i);
                for (std::size_t c = 0; c < h1; ++c) dd1[c] = 0.0;
                for (std::size_t j = 0; j < h2; ++j) {
                    double dj = dd2[j];
                    if (dj == 0.0) continue;
                    const double* w = m.W[1].row(j);
                    for (std::size_t c = 0; c < h1; ++c) dd1[c] += dj * w[c];
                }
                for (std::size_t c = 0; c < h1; ++c)
                    if (a1[c] <= 0.0) dd1[c] = 0.0;
                const double* x = Xb.row(i);
                for (std::size_t j = 0; j < h1; ++j) {
                    double dj = dd1[j];
                    if (dj == 0.0) continue;
                    double* g = gW[0].row(j);
                    for (std::size_t c = 0; c < d; ++c) g[c] += dj * x[c];
                    gb[0][j] += dj;
                }
            }
            // SGD step
            for (std::size_t l = 0; l < m.W.size(); ++l) {
                double* w = m.W[l].a.data();
                const double* g = gW[l].a.data();
                for (std::size_t i = 0; i < m.W[l].a.size(); ++i) w[i] -= lr * g[i];
                for (std::size_t i = 0; i < m.b[l].size(); ++i) m.b[l][i] -= lr * gb[l][i];
            }
            refresh_transposes();
        }
        double epoch_loss = loss_sum / static_cast<double>(batches_per_epoch);
        report.epoch_loss.push_back(epoch_loss);
        if (epoch_loss < best * (1.0 - cfg.rel_tol)) {
            best = epoch_loss;
            stall = 0;
        } else if (++stall >= cfg.patience) {
            if (decays < cfg.max_decays) {
                lr /= cfg.decay_factor;
                ++decays;
                stall = 0;
                report.lr_events.push_back({epoch, lr});
            } else {
                break;
            }
        }
    }
    report.epochs = static_cast<int>(report.epoch_loss.size());
    report.final_checksum = parameter_checksum(m);
    return report;
}

} // namespace pcconf
