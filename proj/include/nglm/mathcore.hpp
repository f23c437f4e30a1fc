#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "nglm/matrix.hpp"

namespace nglm::mathcore {

/// Single-layer LSTM parameters. Gate rows of W, U and entries of b are
/// stacked in the fixed order [input, forget, output, candidate]; checkpoints
/// depend on this layout.
struct LstmParams {
    Matrix w;               // 4D × input_dim
    Matrix u;               // 4D × D
    std::vector<double> b;  // 4D
    std::size_t hidden = 0;
    std::size_t input_dim = 0;

    LstmParams() = default;
    LstmParams(std::size_t d, std::size_t in_dim)
        : w(4 * d, in_dim), u(4 * d, d), b(4 * d, 0.0), hidden(d), input_dim(in_dim) {}
};

struct LstmState {
    std::vector<double> h;
    std::vector<double> c;

    explicit LstmState(std::size_t d = 0) : h(d, 0.0), c(d, 0.0) {}
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// One recurrence step: a = Wx + Uh + b, gates σ/σ/σ/tanh, c = f⊙c + i⊙g,
/// h = o⊙tanh(c).
inline LstmState lstm_step(const LstmParams& params, const std::vector<double>& x,
                           const LstmState& prev) {
    const std::size_t d = params.hidden;
    if (x.size() != params.input_dim || prev.h.size() != d || prev.c.size() != d)
        throw std::invalid_argument("lstm_step: dimension mismatch");

    std::vector<double> a(params.b);
    matvec_acc(params.w, x.data(), a.data());
    matvec_acc(params.u, prev.h.data(), a.data());

    LstmState next(d);
    for (std::size_t k = 0; k < d; ++k) {
        const double gi = sigmoid(a[k]);
        const double gf = sigmoid(a[d + k]);
        const double go = sigmoid(a[2 * d + k]);
        const double gg = std::tanh(a[3 * d + k]);
        next.c[k] = gf * prev.c[k] + gi * gg;
        next.h[k] = go * std::tanh(next.c[k]);
    }
    return next;
}

/// Max-subtracted softmax; all outputs positive, sum 1.
inline std::vector<double> softmax(const std::vector<double>& logits) {
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

/// Gradients of a sequence loss with respect to every parameter and every
/// input vector.
struct SequenceGradients {
    Matrix d_w;
    Matrix d_u;
    std::vector<double> d_b;
    Matrix d_output_embeddings;
    std::vector<std::vector<double>> d_inputs;

    SequenceGradients() = default;
    SequenceGradients(const LstmParams& params, std::size_t vocab, std::size_t steps)
        : d_w(4 * params.hidden, params.input_dim),
          d_u(4 * params.hidden, params.hidden),
          d_b(4 * params.hidden, 0.0),
          d_output_embeddings(vocab, params.hidden),
          d_inputs(steps, std::vector<double>(params.input_dim, 0.0)) {}

    void add(const SequenceGradients& o) {
        d_w += o.d_w;
        d_u += o.d_u;
        for (std::size_t i = 0; i < d_b.size(); ++i) d_b[i] += o.d_b[i];
        d_output_embeddings += o.d_output_embeddings;
    }
};

struct SequenceResult {
    double loss = 0.0;             // sum of -log p(target) over masked steps
    std::size_t masked_steps = 0;  // number of steps contributing to loss
    std::vector<double> target_logprobs;  // log p(target_t) for every step
};

namespace detail {

/// Forward pass with everything the backward pass needs cached. Steps are the
/// positions of `inputs`; step t predicts targets[t] from the state after
/// consuming inputs[0..t].
struct SequenceTape {
    std::size_t steps = 0;
    std::vector<double> h;       // (steps+1) × D, h[0] = initial zero state
    std::vector<double> c;       // (steps+1) × D
    std::vector<double> gates;   // steps × 4D, post-activation [i,f,o,g]
    std::vector<double> tanh_c;  // steps × D
    std::vector<double> probs;   // steps × V
};

inline SequenceResult sequence_forward_impl(const LstmParams& params,
                                            const std::vector<std::vector<double>>& inputs,
                                            const std::vector<int>& targets,
                                            const Matrix& output_embeddings,
                                            const std::vector<char>& loss_mask,
                                            SequenceTape* tape) {
    const std::size_t steps = inputs.size();
    const std::size_t d = params.hidden;
    const std::size_t v = output_embeddings.rows;
    if (targets.size() != steps || loss_mask.size() != steps)
        throw std::invalid_argument("sequence: inputs, targets and mask must align");
    if (output_embeddings.cols != d) throw std::invalid_argument("sequence: output embedding width");

    SequenceResult result;
    result.target_logprobs.resize(steps);

    std::vector<double> h(d, 0.0), c(d, 0.0);
    std::vector<double> a(4 * d);
    std::vector<double> logits(v);

    if (tape) {
        tape->steps = steps;
        tape->h.assign((steps + 1) * d, 0.0);
        tape->c.assign((steps + 1) * d, 0.0);
        tape->gates.assign(steps * 4 * d, 0.0);
        tape->tanh_c.assign(steps * d, 0.0);
        tape->probs.assign(steps * v, 0.0);
    }

    for (std::size_t t = 0; t < steps; ++t) {
        if (inputs[t].size() != params.input_dim)
            throw std::invalid_argument("sequence: input width mismatch");
        for (std::size_t k = 0; k < 4 * d; ++k) a[k] = params.b[k];
        matvec_acc(params.w, inputs[t].data(), a.data());
        matvec_acc(params.u, h.data(), a.data());
        for (std::size_t k = 0; k < d; ++k) {
            const double gi = sigmoid(a[k]);
            const double gf = sigmoid(a[d + k]);
            const double go = sigmoid(a[2 * d + k]);
            const double gg = std::tanh(a[3 * d + k]);
            c[k] = gf * c[k] + gi * gg;
            const double tc = std::tanh(c[k]);
            h[k] = go * tc;
            if (tape) {
                tape->gates[(t * 4 + 0) * d + k] = gi;
                tape->gates[(t * 4 + 1) * d + k] = gf;
                tape->gates[(t * 4 + 2) * d + k] = go;
                tape->gates[(t * 4 + 3) * d + k] = gg;
                tape->tanh_c[t * d + k] = tc;
            }
        }
        if (tape) {
            std::copy(h.begin(), h.end(), tape->h.begin() + (t + 1) * d);
            std::copy(c.begin(), c.end(), tape->c.begin() + (t + 1) * d);
        }

        // logits = E_out h (no output bias), then stable log-softmax
        double mx = -1e300;
        for (std::size_t row = 0; row < v; ++row) {
            const double* er = output_embeddings.row(row);
            double acc = 0.0;
            for (std::size_t k = 0; k < d; ++k) acc += er[k] * h[k];
            logits[row] = acc;
            mx = std::max(mx, acc);
        }
        double sum = 0.0;
        for (std::size_t row = 0; row < v; ++row) {
            const double e = std::exp(logits[row] - mx);
            logits[row] = e;  // reuse as unnormalised probs
            sum += e;
        }
        const int target = targets[t];
        if (target < 0 || static_cast<std::size_t>(target) >= v)
            throw std::invalid_argument("sequence: target id out of range");
        const double logp = std::log(logits[static_cast<std::size_t>(target)] / sum);
        result.target_logprobs[t] = logp;
        if (loss_mask[t]) {
            result.loss -= logp;
            ++result.masked_steps;
        }
        if (tape) {
            double* p = tape->probs.data() + t * v;
            for (std::size_t row = 0; row < v; ++row) p[row] = logits[row] / sum;
        }
    }
    return result;
}

}  // namespace detail

/// Loss only; used by evaluation paths.
inline SequenceResult sequence_forward(const LstmParams& params,
                                       const std::vector<std::vector<double>>& inputs,
                                       const std::vector<int>& targets,
                                       const Matrix& output_embeddings,
                                       const std::vector<char>& loss_mask) {
    return detail::sequence_forward_impl(params, inputs, targets, output_embeddings, loss_mask,
                                         nullptr);
}

/// Full-sequence backpropagation through time. Loss is the sum of
/// -log softmax(E_out h_t)[target_t] over masked steps; gradients are exact.
inline std::pair<SequenceResult, SequenceGradients> sequence_backward(
    const LstmParams& params, const std::vector<std::vector<double>>& inputs,
    const std::vector<int>& targets, const Matrix& output_embeddings,
    const std::vector<char>& loss_mask) {
    detail::SequenceTape tape;
    SequenceResult result = detail::sequence_forward_impl(params, inputs, targets,
                                                          output_embeddings, loss_mask, &tape);
    const std::size_t steps = tape.steps;
    const std::size_t d = params.hidden;
    const std::size_t v = output_embeddings.rows;

    SequenceGradients grads(params, v, steps);
    if (result.masked_steps == 0) return {result, grads};

    std::vector<double> dh(d, 0.0), dc(d, 0.0);
    std::vector<double> dlogits(v);
    std::vector<double> da(4 * d);

    for (std::size_t t = steps; t-- > 0;) {
        if (loss_mask[t]) {
            const double* p = tape.probs.data() + t * v;
            const double* ht = tape.h.data() + (t + 1) * d;
            for (std::size_t row = 0; row < v; ++row) dlogits[row] = p[row];
            dlogits[static_cast<std::size_t>(targets[t])] -= 1.0;
            // dE_out += dlogits h^T ; dh += E_out^T dlogits
            for (std::size_t row = 0; row < v; ++row) {
                const double dl = dlogits[row];
                double* grow = grads.d_output_embeddings.row(row);
                const double* erow = output_embeddings.row(row);
                for (std::size_t k = 0; k < d; ++k) {
                    grow[k] += dl * ht[k];
                    dh[k] += dl * erow[k];
                }
            }
        }

        const double* gi = tape.gates.data() + (t * 4 + 0) * d;
        const double* gf = tape.gates.data() + (t * 4 + 1) * d;
        const double* go = tape.gates.data() + (t * 4 + 2) * d;
        const double* gg = tape.gates.data() + (t * 4 + 3) * d;
        const double* tc = tape.tanh_c.data() + t * d;
        const double* c_prev = tape.c.data() + t * d;
        const double* h_prev = tape.h.data() + t * d;

        for (std::size_t k = 0; k < d; ++k) {
            const double dck = dc[k] + dh[k] * go[k] * (1.0 - tc[k] * tc[k]);
            const double dok = dh[k] * tc[k];
            const double dik = dck * gg[k];
            const double dfk = dck * c_prev[k];
            const double dgk = dck * gi[k];
            da[k] = dik * gi[k] * (1.0 - gi[k]);
            da[d + k] = dfk * gf[k] * (1.0 - gf[k]);
            da[2 * d + k] = dok * go[k] * (1.0 - go[k]);
            da[3 * d + k] = dgk * (1.0 - gg[k] * gg[k]);
            dc[k] = dck * gf[k];
        }

        outer_acc(da.data(), inputs[t].data(), grads.d_w);
        outer_acc(da.data(), h_prev, grads.d_u);
        for (std::size_t k = 0; k < 4 * d; ++k) grads.d_b[k] += da[k];

        std::fill(grads.d_inputs[t].begin(), grads.d_inputs[t].end(), 0.0);
        matvec_t_acc(params.w, da.data(), grads.d_inputs[t].data());

        std::fill(dh.begin(), dh.end(), 0.0);
        matvec_t_acc(params.u, da.data(), dh.data());
    }
    return {result, grads};
}

}  // namespace nglm::mathcore
