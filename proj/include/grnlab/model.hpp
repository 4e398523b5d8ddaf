#pragma once

// Gene-regulatory-network model families: three-gene rings (single loop, and
// cross-wired double loops with OR/AND promoter logic) plus the four- and
// five-gene AND-gate extensions.  A ModelSpec is compiled once into an
// immutable ModelInstance exposing the vector field and its analytic
// Jacobian; both are pure and safe to evaluate concurrently.

#include <Eigen/Dense>

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace grnlab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;

enum class Family {
    StandardRepressilator,
    CrossRepressilatorOR,
    CrossRepressilatorAND,
    FourGeneAND,
    FiveGeneAND,
};

const char* family_name(Family f);
Family family_from_name(const std::string& name);

/// Number of genes required by a family (3, 3, 3, 4, 5).
int family_gene_count(Family f);

/// Number of per-gene expression-rate entries (1 for pure repression,
/// 3 for two-input AND, 7 for three-input AND).
int family_rate_count(Family f);

/// x^h with the x<=0 case short-circuited to 0 so non-integer exponents are
/// safe on the boundary of the positive orthant.
double hill_pow(double x, double h);

/// d/dx of hill_pow.
double hill_pow_d(double x, double h);

// ---------------------------------------------------------------------------

struct ParamSet {
    Vec b;      ///< basal rates, one per gene
    Mat g;      ///< expression rates: n_genes x rate_count (AND rows are per-configuration)
    Vec alpha;  ///< association constant of the first repressor of each gene
    Vec beta;   ///< association constant of the second repressor
    Vec gamma;  ///< third repressor (FourGeneAND only, empty otherwise)
    Vec d;      ///< degradation rates
    Mat h;      ///< Hill exponents, h(i,j) = exponent of repression of gene i by gene j

    /// True when every per-gene value coincides with gene 0's (cyclic symmetry).
    bool symmetric() const;
};

/// Symmetric constructor: every gene gets the same rates/constants.
/// `rates` must have family_rate_count entries.
ParamSet symmetric_params(Family family, std::span<const double> rates, double alpha,
                          double beta, double d, double hill, double basal = 0.0,
                          double gamma = 1.0);

struct ModelSpec {
    Family family = Family::StandardRepressilator;
    int n_genes = 3;
    ParamSet params;
};

/// Convenience spec with the symmetric constructor applied.
ModelSpec make_symmetric_spec(Family family, std::span<const double> rates, double alpha,
                              double beta, double d, double hill, double basal = 0.0,
                              double gamma = 1.0);

// ---------------------------------------------------------------------------
// Promoter gate forms derived from quasi-steady-state binding kinetics.

enum class Gate { OR, AND2, AND3 };

struct GateInput {
    double x;         ///< repressor concentration
    double assoc;     ///< association constant
    double exponent;  ///< Hill exponent
};

/// Gate output rate.
///   OR:   rates[0] * prod_i 1/(1 + a_i x_i^h_i)
///   AND2: (r0 + r1 u + r2 v) / ((1+u)(1+v)),          u = a0 x0^h0, v = a1 x1^h1
///   AND3: (r0 + r1 u + r2 v + r3 w + r4 vw + r5 uw + r6 uv) / ((1+u)(1+v)(1+w))
/// Throws std::invalid_argument on arity mismatch.
double gate_activation(Gate gate, std::span<const GateInput> inputs,
                       std::span<const double> rates);

/// Gate output plus partial derivatives with respect to each input concentration.
struct GateEval {
    double rate = 0.0;
    double dx[3] = {0.0, 0.0, 0.0};
};
GateEval gate_eval(Gate gate, std::span<const GateInput> inputs,
                   std::span<const double> rates);

// ---------------------------------------------------------------------------

/// One repression edge: `source` represses the owning gene through a Hill
/// factor with the given association constant and exponent.
struct Edge {
    int source;
    double assoc;
    double exponent;
};

/// Compiled model.  Immutable after build_model; rhs/jacobian are pure.
class ModelInstance {
  public:
    const ModelSpec& spec() const { return spec_; }
    Family family() const { return spec_.family; }
    int dim() const { return spec_.n_genes; }
    const ParamSet& params() const { return spec_.params; }
    Gate gate() const { return gate_; }
    const std::vector<Edge>& edges(int gene) const { return edges_[gene]; }

    /// dx/dt with the instance's own parameters.
    void rhs(const Vec& x, Vec& out) const { rhs_with(spec_.params, x, out); }
    Vec rhs(const Vec& x) const;

    /// dx/dt with an overridden parameter set (used by time-dependent schedules).
    void rhs_with(const ParamSet& p, const Vec& x, Vec& out) const;

    /// Analytic Jacobian of rhs.
    void jacobian(const Vec& x, Mat& out) const { jacobian_with(spec_.params, x, out); }
    Mat jacobian(const Vec& x) const;
    void jacobian_with(const ParamSet& p, const Vec& x, Mat& out) const;

    /// A coarse per-gene scale, max_i rate_i / d_i; used for seeding solvers.
    double state_scale() const;

  private:
    friend ModelInstance build_model(const ModelSpec&);
    ModelSpec spec_;
    Gate gate_ = Gate::OR;
    std::vector<std::vector<Edge>> edges_;  // per gene, in gate-input order
};

/// Validates the spec and compiles it.  Throws std::invalid_argument on
/// inconsistent family/gene count, negative rates, or Hill exponents < 1.
ModelInstance build_model(const ModelSpec& spec);

struct ParamAddress;

/// A copy of the model with one named parameter overridden.
ModelInstance with_param(const ModelInstance& model, const std::string& name, double value);

// ---------------------------------------------------------------------------
// Parameter addressing.  Names follow the per-family conventions:
//   "g"        all expression-rate entries (column 0 for AND families)
//   "g2"       gene 2's rate for StandardRepressilator / CrossRepressilatorOR,
//              configuration rate 2 (shared across genes) for AND families
//   "alpha" / "alpha1" ... association constants, same for "beta", "gamma"
//   "d", "b", "h" with optional 1-based index
// Unknown names throw std::invalid_argument listing the family.

struct ParamAddress {
    enum class Field { Basal, Rate, Alpha, Beta, Gamma, Degradation, Hill };
    Field field = Field::Rate;
    int index = -1;  ///< -1 = all entries; otherwise 0-based gene or rate column
};

ParamAddress resolve_param(const ModelSpec& spec, const std::string& name);
void apply_param(const ModelSpec& spec, ParamSet& p, const ParamAddress& a, double value);
double read_param(const ModelSpec& spec, const ParamSet& p, const ParamAddress& a);

}  // namespace grnlab
