#pragma once

// Dense statevector simulation of the layered data-encoding ansatz and of
// the compute-uncompute overlap circuit used for kernel estimation.
//
// Basis ordering is little-endian: qubit q corresponds to bit q of the
// amplitude index.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lqmvkl::qsim {

using complex = std::complex<double>;

inline constexpr std::size_t max_qubits = 12;

class StateVector {
public:
    // |0...0>
    explicit StateVector(std::size_t num_qubits) : num_qubits_(num_qubits) {
        if (num_qubits == 0 || num_qubits > max_qubits) {
            throw std::invalid_argument("StateVector: qubit count must be in [1, " +
                                        std::to_string(max_qubits) + "]");
        }
        amplitudes_.assign(std::size_t{1} << num_qubits, complex{0.0, 0.0});
        amplitudes_[0] = 1.0;
    }

    StateVector(std::size_t num_qubits, std::vector<complex> amplitudes)
        : num_qubits_(num_qubits), amplitudes_(std::move(amplitudes)) {
        if (num_qubits == 0 || num_qubits > max_qubits ||
            amplitudes_.size() != (std::size_t{1} << num_qubits)) {
            throw std::invalid_argument("StateVector: amplitude count must equal 2^num_qubits");
        }
    }

    std::size_t num_qubits() const noexcept { return num_qubits_; }
    std::size_t dim() const noexcept { return amplitudes_.size(); }

    std::span<const complex> amplitudes() const noexcept { return amplitudes_; }
    std::span<complex> amplitudes() noexcept { return amplitudes_; }

    const complex& operator[](std::size_t i) const { return amplitudes_[i]; }
    complex& operator[](std::size_t i) { return amplitudes_[i]; }

    double norm_squared() const noexcept {
        double s = 0.0;
        for (const auto& a : amplitudes_) s += std::norm(a);
        return s;
    }

    friend bool operator==(const StateVector&, const StateVector&) = default;

private:
    std::size_t num_qubits_;
    std::vector<complex> amplitudes_;
};

// <a|b>
inline complex inner_product(std::span<const complex> a, std::span<const complex> b) {
    if (a.size() != b.size()) throw std::invalid_argument("inner_product: size mismatch");
    complex s{0.0, 0.0};
    for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
    return s;
}

enum class GateKind { H, RX, RY, RZ, CNOT };

inline const char* to_string(GateKind kind) {
    switch (kind) {
        case GateKind::H: return "H";
        case GateKind::RX: return "RX";
        case GateKind::RY: return "RY";
        case GateKind::RZ: return "RZ";
        case GateKind::CNOT: return "CNOT";
    }
    return "?";
}

inline bool is_rotation(GateKind kind) {
    return kind == GateKind::RX || kind == GateKind::RY || kind == GateKind::RZ;
}

// Marks a rotation whose angle equals scale * theta[index] for the trainable
// parameter vector theta = (beta_1..beta_P, gamma_1..gamma_P).
struct ParamTag {
    std::size_t index;
    double scale;

    friend bool operator==(const ParamTag&, const ParamTag&) = default;
};

struct GateOp {
    GateKind kind;
    std::size_t target;
    std::optional<std::size_t> control;
    std::optional<double> angle;
    std::optional<ParamTag> param;

    static GateOp h(std::size_t q) { return {GateKind::H, q, std::nullopt, std::nullopt, std::nullopt}; }
    static GateOp rx(std::size_t q, double a, std::optional<ParamTag> p = std::nullopt) {
        return {GateKind::RX, q, std::nullopt, a, p};
    }
    static GateOp ry(std::size_t q, double a, std::optional<ParamTag> p = std::nullopt) {
        return {GateKind::RY, q, std::nullopt, a, p};
    }
    static GateOp rz(std::size_t q, double a, std::optional<ParamTag> p = std::nullopt) {
        return {GateKind::RZ, q, std::nullopt, a, p};
    }
    static GateOp cnot(std::size_t c, std::size_t t) {
        return {GateKind::CNOT, t, c, std::nullopt, std::nullopt};
    }

    // Throws if the gate is malformed or does not fit num_qubits.
    void validate(std::size_t num_qubits) const {
        if (target >= num_qubits) {
            throw std::out_of_range("gate " + std::string(to_string(kind)) + ": target qubit " +
                                    std::to_string(target) + " out of range");
        }
        if (kind == GateKind::CNOT) {
            if (!control) throw std::invalid_argument("CNOT requires a control qubit");
            if (*control >= num_qubits) {
                throw std::out_of_range("CNOT: control qubit " + std::to_string(*control) +
                                        " out of range");
            }
            if (*control == target) throw std::invalid_argument("CNOT: control equals target");
        } else if (control) {
            throw std::invalid_argument("only CNOT carries a control qubit");
        }
        if (is_rotation(kind)) {
            if (!angle || !std::isfinite(*angle)) {
                throw std::invalid_argument("rotation gate requires a finite angle");
            }
        } else if (angle) {
            throw std::invalid_argument("H and CNOT carry no angle");
        }
    }

    GateOp inverse() const {
        GateOp g = *this;
        if (angle) g.angle = -*angle;
        if (param) g.param = ParamTag{param->index, -param->scale};
        return g;
    }

    friend bool operator==(const GateOp&, const GateOp&) = default;
};

struct Circuit {
    std::size_t num_qubits = 0;
    std::vector<GateOp> gates;

    void validate() const {
        for (const auto& g : gates) g.validate(num_qubits);
    }

    std::size_t count(GateKind kind) const {
        return static_cast<std::size_t>(
            std::count_if(gates.begin(), gates.end(), [kind](const GateOp& g) { return g.kind == kind; }));
    }
    std::size_t single_qubit_count() const { return gates.size() - count(GateKind::CNOT); }

    // Reversed order with every rotation angle negated.
    Circuit inverse() const {
        Circuit out{num_qubits, {}};
        out.gates.reserve(gates.size());
        for (auto it = gates.rbegin(); it != gates.rend(); ++it) out.gates.push_back(it->inverse());
        return out;
    }
};

struct AnsatzParams {
    std::vector<double> betas;
    std::vector<double> gammas;

    AnsatzParams() = default;
    AnsatzParams(std::vector<double> b, std::vector<double> g) : betas(std::move(b)), gammas(std::move(g)) {
        validate();
    }

    // Layout (beta_1..beta_P, gamma_1..gamma_P).
    static AnsatzParams from_flat(std::span<const double> theta) {
        if (theta.empty() || theta.size() % 2 != 0) {
            throw std::invalid_argument("AnsatzParams: flat parameter vector must have even positive length");
        }
        const auto p = theta.size() / 2;
        return {std::vector<double>(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(p)),
                std::vector<double>(theta.begin() + static_cast<std::ptrdiff_t>(p), theta.end())};
    }

    std::size_t depth() const noexcept { return betas.size(); }
    std::size_t size() const noexcept { return 2 * betas.size(); }

    std::vector<double> flat() const {
        std::vector<double> out(betas);
        out.insert(out.end(), gammas.begin(), gammas.end());
        return out;
    }

    void validate() const {
        if (betas.empty()) throw std::invalid_argument("AnsatzParams: depth P must be positive");
        if (betas.size() != gammas.size()) {
            throw std::invalid_argument("AnsatzParams: betas and gammas must both have P entries");
        }
        for (double v : betas)
            if (!std::isfinite(v)) throw std::invalid_argument("AnsatzParams: non-finite beta");
        for (double v : gammas)
            if (!std::isfinite(v)) throw std::invalid_argument("AnsatzParams: non-finite gamma");
    }

    friend bool operator==(const AnsatzParams&, const AnsatzParams&) = default;
};

namespace detail {

inline constexpr double inv_sqrt2 = 0.70710678118654752440;

// Applies the gate to raw amplitudes without validation.
inline void apply_unchecked(std::span<complex> amp, const GateOp& gate) {
    const std::size_t dim = amp.size();
    const std::size_t bit = std::size_t{1} << gate.target;
    switch (gate.kind) {
        case GateKind::H:
            for (std::size_t i = 0; i < dim; ++i) {
                if (i & bit) continue;
                const complex a0 = amp[i], a1 = amp[i | bit];
                amp[i] = (a0 + a1) * inv_sqrt2;
                amp[i | bit] = (a0 - a1) * inv_sqrt2;
            }
            break;
        case GateKind::RX: {
            const double c = std::cos(*gate.angle / 2.0), s = std::sin(*gate.angle / 2.0);
            const complex mis{0.0, -s};
            for (std::size_t i = 0; i < dim; ++i) {
                if (i & bit) continue;
                const complex a0 = amp[i], a1 = amp[i | bit];
                amp[i] = c * a0 + mis * a1;
                amp[i | bit] = mis * a0 + c * a1;
            }
            break;
        }
        case GateKind::RY: {
            const double c = std::cos(*gate.angle / 2.0), s = std::sin(*gate.angle / 2.0);
            for (std::size_t i = 0; i < dim; ++i) {
                if (i & bit) continue;
                const complex a0 = amp[i], a1 = amp[i | bit];
                amp[i] = c * a0 - s * a1;
                amp[i | bit] = s * a0 + c * a1;
            }
            break;
        }
        case GateKind::RZ: {
            const complex lo = std::polar(1.0, -*gate.angle / 2.0);
            const complex hi = std::polar(1.0, *gate.angle / 2.0);
            for (std::size_t i = 0; i < dim; ++i) amp[i] *= (i & bit) ? hi : lo;
            break;
        }
        case GateKind::CNOT: {
            const std::size_t cbit = std::size_t{1} << *gate.control;
            for (std::size_t i = 0; i < dim; ++i) {
                if ((i & cbit) && !(i & bit)) std::swap(amp[i], amp[i | bit]);
            }
            break;
        }
    }
}

// out += coeff * (-i/2) * sigma * in, where sigma is the Pauli generator of
// the rotation kind. Used for d/dangle R(angle) = (-i/2) sigma R(angle).
inline void add_generator_term(std::span<complex> out, std::span<const complex> in, GateKind kind,
                               std::size_t target, double coeff) {
    const std::size_t bit = std::size_t{1} << target;
    const complex f{0.0, -0.5 * coeff};
    for (std::size_t i = 0; i < in.size(); ++i) {
        const bool one = (i & bit) != 0;
        switch (kind) {
            case GateKind::RX: out[i] += f * in[i ^ bit]; break;
            case GateKind::RY:
                // Y|0> = i|1>, Y|1> = -i|0>
                out[i] += f * (one ? complex{0.0, 1.0} : complex{0.0, -1.0}) * in[i ^ bit];
                break;
            case GateKind::RZ: out[i] += f * (one ? -in[i] : in[i]); break;
            default: throw std::logic_error("generator requested for a non-rotation gate");
        }
    }
}

}  // namespace detail

inline void apply_gate_in_place(StateVector& state, const GateOp& gate) {
    gate.validate(state.num_qubits());
    detail::apply_unchecked(state.amplitudes(), gate);
}

inline StateVector apply_gate(StateVector state, const GateOp& gate) {
    apply_gate_in_place(state, gate);
    return state;
}

inline StateVector run_circuit(const Circuit& circuit, StateVector initial) {
    if (circuit.num_qubits != initial.num_qubits()) {
        throw std::invalid_argument("run_circuit: circuit has " + std::to_string(circuit.num_qubits) +
                                    " qubits, state has " + std::to_string(initial.num_qubits()));
    }
    circuit.validate();
    for (const auto& g : circuit.gates) detail::apply_unchecked(initial.amplitudes(), g);
    return initial;
}

inline StateVector run_circuit(const Circuit& circuit) {
    return run_circuit(circuit, StateVector(circuit.num_qubits));
}

// H on every qubit, then P layers of: RY(x_q) on each qubit; for each
// adjacent pair (q, q+1) CNOT, RZ(gamma_p) on q+1, CNOT; RX(2 beta_p) on each
// qubit. Rotations driven by theta carry a ParamTag.
inline Circuit build_ansatz_circuit(std::span<const double> x, const AnsatzParams& params) {
    if (x.empty()) throw std::invalid_argument("build_ansatz_circuit: empty feature vector");
    params.validate();
    const std::size_t d = x.size(), depth = params.depth();
    if (d > max_qubits) throw std::invalid_argument("build_ansatz_circuit: too many features for the simulator");
    for (double v : x)
        if (!std::isfinite(v)) throw std::invalid_argument("build_ansatz_circuit: non-finite feature");

    Circuit c{d, {}};
    c.gates.reserve(d + depth * (3 * d - 1) + 2 * depth * (d - 1));
    for (std::size_t q = 0; q < d; ++q) c.gates.push_back(GateOp::h(q));
    for (std::size_t p = 0; p < depth; ++p) {
        for (std::size_t q = 0; q < d; ++q) c.gates.push_back(GateOp::ry(q, x[q]));
        const ParamTag gamma_tag{depth + p, 1.0};
        for (std::size_t q = 0; q + 1 < d; ++q) {
            c.gates.push_back(GateOp::cnot(q, q + 1));
            c.gates.push_back(GateOp::rz(q + 1, params.gammas[p], gamma_tag));
            c.gates.push_back(GateOp::cnot(q, q + 1));
        }
        const ParamTag beta_tag{p, 2.0};
        for (std::size_t q = 0; q < d; ++q) c.gates.push_back(GateOp::rx(q, 2.0 * params.betas[p], beta_tag));
    }
    return c;
}

// W(x_i) followed by the gate-by-gate inverse of W(x_j).
inline Circuit build_overlap_circuit(std::span<const double> xi, std::span<const double> xj,
                                     const AnsatzParams& params) {
    if (xi.size() != xj.size()) {
        throw std::invalid_argument("build_overlap_circuit: feature lengths differ (" +
                                    std::to_string(xi.size()) + " vs " + std::to_string(xj.size()) + ")");
    }
    Circuit c = build_ansatz_circuit(xi, params);
    const Circuit back = build_ansatz_circuit(xj, params).inverse();
    c.gates.insert(c.gates.end(), back.gates.begin(), back.gates.end());
    return c;
}

inline double zero_probability(const StateVector& state) {
    return std::clamp(std::norm(state[0]), 0.0, 1.0);
}

// W(x)|0> together with d/dtheta_k W(x)|0> for every trainable parameter,
// propagated gate by gate (forward-mode differentiation of the statevector).
struct EncodedState {
    StateVector state;
    std::vector<StateVector> tangents;
};

inline EncodedState encode_with_tangents(const Circuit& circuit, std::size_t num_params) {
    circuit.validate();
    EncodedState out{StateVector(circuit.num_qubits), {}};
    std::vector<complex> zero(out.state.dim(), complex{0.0, 0.0});
    out.tangents.assign(num_params, StateVector(circuit.num_qubits, zero));
    for (const auto& g : circuit.gates) {
        detail::apply_unchecked(out.state.amplitudes(), g);
        for (auto& t : out.tangents) detail::apply_unchecked(t.amplitudes(), g);
        if (g.param) {
            if (g.param->index >= num_params) throw std::out_of_range("encode_with_tangents: parameter index");
            detail::add_generator_term(out.tangents[g.param->index].amplitudes(), out.state.amplitudes(), g.kind,
                                       g.target, g.param->scale);
        }
    }
    return out;
}

}  // namespace lqmvkl::qsim
