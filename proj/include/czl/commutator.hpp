#pragma once

#include "czl/lattice.hpp"
#include "czl/multipliers.hpp"
#include "czl/symbol_family.hpp"

#include <json.hpp>

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace czl {

/// One multiplier symbol per parameter, with cached lattice tables of every partial
/// product prod_{s in S} T_s and of its adjoint.
class OperatorChoice {
public:
    OperatorChoice() = default;
    /// Throws StructuralError when the count or a dimension does not match the lattice.
    OperatorChoice(const ProductLattice& lattice, std::vector<MultiplierSymbol> symbols);

    [[nodiscard]] const ProductLattice& lattice() const { return lattice_; }
    [[nodiscard]] int parameters() const { return static_cast<int>(symbols_.size()); }
    [[nodiscard]] const std::vector<MultiplierSymbol>& symbols() const { return symbols_; }
    /// Lattice table of prod_{s in mask} T_s (bit s set means s in S), or of its adjoint.
    [[nodiscard]] std::span<const cplx> subset_table(unsigned mask, bool adjoint = false) const;
    /// Largest |T_s| on the lattice, per parameter.
    [[nodiscard]] double symbol_bound(int s) const { return bounds_[s]; }

private:
    ProductLattice lattice_;
    std::vector<MultiplierSymbol> symbols_;
    std::vector<std::vector<cplx>> tables_;
    std::vector<std::vector<cplx>> adjoint_tables_;
    std::vector<double> bounds_;
};

/// Recursive evaluation of [T_1,[T_2,...[T_t, M_b]...]] f.
[[nodiscard]] GridFunction iterated_commutator_apply(const GridFunction& b, const GridFunction& f,
                                                     const OperatorChoice& ops);
/// Sum over S of (-1)^|S| T_{S^c}(b T_S f).
[[nodiscard]] GridFunction expanded_commutator_apply(const GridFunction& b, const GridFunction& f,
                                                     const OperatorChoice& ops);
/// Unsigned term T_{S^c}(b T_S f) of the expansion.
[[nodiscard]] GridFunction commutator_term(const GridFunction& b, const GridFunction& f, const OperatorChoice& ops,
                                           unsigned mask);
/// Adjoint in f: sum over S of (-1)^|S| T_S^*(conj(b) T_{S^c}^* g).
[[nodiscard]] GridFunction commutator_adjoint_apply(const GridFunction& b, const GridFunction& g,
                                                    const OperatorChoice& ops);
/// Pi(f, g) with <C(b, f), g> = <b, Pi(f, g)> for every b.
[[nodiscard]] GridFunction pi_form(const GridFunction& f, const GridFunction& g, const OperatorChoice& ops);

enum class NormMethod { power, lanczos };

struct NormOptions {
    double tol = 1e-6;
    /// Lanczos builds a Krylov basis of C^*C from the same start (full reorthogonalization,
    /// restarts from the Ritz vector) and stops when the Ritz residual is below tol.
    NormMethod method = NormMethod::power;
    std::size_t max_iter = 1000;
    std::uint64_t seed = 0;
};

struct NormResult {
    double value = 0.0;
    /// Applications of C^*C.
    std::size_t iterations = 0;
    bool converged = false;
    /// The map vanishes up to rounding relative to 2^t |b|_inf prod sup|T_s|.
    bool zero_map = false;

    [[nodiscard]] nlohmann::json to_json() const;
};

/// Largest singular value of f -> C(b, f) by iteration on C^*C from a seeded random start.
[[nodiscard]] NormResult operator_norm(const GridFunction& b, const OperatorChoice& ops, const NormOptions& options = {});

struct SupNormResult {
    double value = 0.0;
    std::vector<std::size_t> argmax;
    /// Every choice vector in lexicographic order (last parameter fastest) with its norm.
    std::vector<std::vector<std::size_t>> choices;
    std::vector<NormResult> norms;
};

/// Maximum of operator_norm over every choice of one member per family, each run with
/// options.seed. `threads` > 1 evaluates choices concurrently with identical results.
[[nodiscard]] SupNormResult sup_commutator_norm(const GridFunction& b, std::span<const SymbolFamily> families,
                                                const NormOptions& options = {}, unsigned threads = 1);

struct ConeQuantities {
    /// ||T_D beta||_2.
    double energy = 0.0;
    /// ||(H_D - T_D) beta||_4.
    double leakage = 0.0;
    /// ||(H_C - P_C)|T_D beta|^2||_2.
    double square_leakage = 0.0;
};

/// Quantities of the three selection conditions for a cone pair per parameter; T_D is the
/// smoothed cone operator with the pair's tau and order, H the half-space projections.
[[nodiscard]] ConeQuantities cone_quantities(const GridFunction& beta, std::span<const ConePair> pairs);

/// True when every extreme ray of the inner cone lies in the closed outer cone.
[[nodiscard]] bool inner_inside_outer(const ConePair& pair, double tol = 1e-12);

struct ConeSelectionOptions {
    double kappa = 0.5;
    /// Aperture side of D per parameter.
    std::vector<double> apertures;
    std::uint64_t seed = 0;
    std::size_t max_tries = 100;
    double tau = 0.5;
    int order = 2;
};

struct ConeSelection {
    bool success = false;
    /// Chosen pairs on success, best attempt otherwise.
    std::vector<ConePair> pairs;
    ConeQuantities quantities;
    double energy_threshold = 0.0;
    std::uint64_t seed = 0;
    /// Rotations drawn (each tried with every sign pattern of the directions).
    std::size_t tries = 0;

    [[nodiscard]] nlohmann::json to_json() const;
};

/// Random cone selection: per try, draws one uniform rotation per parameter, sets D to the
/// rotated cone of the given aperture and C to a wider cone whose axis is tilted from D's
/// by less than a quarter of D's angular margin to the orthogonal hyperplane, then tests
/// D inside C, ||T_D beta||_2 >= 4^-t, ||(H_D - T_D) beta||_4 <= kappa and
/// ||(H_C - P_C)|T_D beta|^2||_2 <= kappa for every sign pattern of the axes.
/// Throws PreconditionError unless ||beta||_2 = 1 to 1e-8, DomainError unless kappa > 0
/// and the apertures are positive, one per parameter.
[[nodiscard]] ConeSelection select_cones(const GridFunction& beta, const ConeSelectionOptions& options);

/// Uniform random rotation of R^d (d = 1 gives the identity).
[[nodiscard]] Matrix random_rotation(int d, std::mt19937_64& rng);

}  // namespace czl
