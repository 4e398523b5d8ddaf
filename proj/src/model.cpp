#include "grnlab/model.hpp"

#include <cctype>
#include <cmath>
#include <sstream>

namespace grnlab {

const char* family_name(Family f) {
    switch (f) {
        case Family::StandardRepressilator: return "standard_repressilator";
        case Family::CrossRepressilatorOR: return "cross_or";
        case Family::CrossRepressilatorAND: return "cross_and";
        case Family::FourGeneAND: return "four_gene_and";
        case Family::FiveGeneAND: return "five_gene_and";
    }
    return "?";
}

Family family_from_name(const std::string& name) {
    for (Family f : {Family::StandardRepressilator, Family::CrossRepressilatorOR,
                     Family::CrossRepressilatorAND, Family::FourGeneAND, Family::FiveGeneAND}) {
        if (name == family_name(f)) return f;
    }
    throw std::invalid_argument("unknown model family: " + name);
}

int family_gene_count(Family f) {
    switch (f) {
        case Family::FourGeneAND: return 4;
        case Family::FiveGeneAND: return 5;
        default: return 3;
    }
}

int family_rate_count(Family f) {
    switch (f) {
        case Family::StandardRepressilator:
        case Family::CrossRepressilatorOR: return 1;
        case Family::CrossRepressilatorAND:
        case Family::FiveGeneAND: return 3;
        case Family::FourGeneAND: return 7;
    }
    return 1;
}

double hill_pow(double x, double h) {
    if (x <= 0.0) return 0.0;
    double r = std::round(h);
    if (r == h && r >= 0.0 && r <= 16.0) {
        double acc = 1.0;
        for (int k = 0; k < static_cast<int>(r); ++k) acc *= x;
        return acc;
    }
    return std::exp(h * std::log(x));
}

double hill_pow_d(double x, double h) {
    if (x <= 0.0) return h == 1.0 ? 1.0 : 0.0;
    return h * hill_pow(x, h - 1.0);
}

bool ParamSet::symmetric() const {
    auto all_eq = [](const Vec& v) {
        for (int i = 1; i < v.size(); ++i)
            if (v[i] != v[0]) return false;
        return true;
    };
    if (!all_eq(b) || !all_eq(alpha) || !all_eq(beta) || !all_eq(d)) return false;
    if (gamma.size() > 0 && !all_eq(gamma)) return false;
    for (int i = 1; i < g.rows(); ++i)
        if (g.row(i) != g.row(0)) return false;
    double h0 = -1.0;
    for (int i = 0; i < h.rows(); ++i)
        for (int j = 0; j < h.cols(); ++j) {
            if (i == j) continue;
            if (h0 < 0.0) h0 = h(i, j);
            else if (h(i, j) != h0) return false;
        }
    return true;
}

ParamSet symmetric_params(Family family, std::span<const double> rates, double alpha,
                          double beta, double d, double hill, double basal, double gamma) {
    const int n = family_gene_count(family);
    const int nr = family_rate_count(family);
    if (static_cast<int>(rates.size()) != nr) {
        std::ostringstream os;
        os << family_name(family) << " needs " << nr << " rate entries per gene, got "
           << rates.size();
        throw std::invalid_argument(os.str());
    }
    ParamSet p;
    p.b = Vec::Constant(n, basal);
    p.g.resize(n, nr);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < nr; ++j) p.g(i, j) = rates[j];
    p.alpha = Vec::Constant(n, alpha);
    p.beta = Vec::Constant(n, beta);
    p.gamma = family == Family::FourGeneAND ? Vec::Constant(n, gamma) : Vec();
    p.d = Vec::Constant(n, d);
    p.h = Mat::Constant(n, n, hill);
    return p;
}

ModelSpec make_symmetric_spec(Family family, std::span<const double> rates, double alpha,
                              double beta, double d, double hill, double basal, double gamma) {
    ModelSpec spec;
    spec.family = family;
    spec.n_genes = family_gene_count(family);
    spec.params = symmetric_params(family, rates, alpha, beta, d, hill, basal, gamma);
    return spec;
}

// ---------------------------------------------------------------------------

static int gate_arity(Gate g) { return g == Gate::AND3 ? 3 : 2; }
static int gate_rate_count(Gate g) {
    switch (g) {
        case Gate::OR: return 1;
        case Gate::AND2: return 3;
        case Gate::AND3: return 7;
    }
    return 1;
}

GateEval gate_eval(Gate gate, std::span<const GateInput> inputs, std::span<const double> rates) {
    if (static_cast<int>(inputs.size()) != gate_arity(gate))
        throw std::invalid_argument("gate arity mismatch");
    if (static_cast<int>(rates.size()) != gate_rate_count(gate))
        throw std::invalid_argument("gate rate-count mismatch");

    // u_k = assoc_k * x_k^h_k and its x-derivative
    double u[3] = {0, 0, 0}, du[3] = {0, 0, 0}, D = 1.0;
    const int m = static_cast<int>(inputs.size());
    for (int k = 0; k < m; ++k) {
        u[k] = inputs[k].assoc * hill_pow(inputs[k].x, inputs[k].exponent);
        du[k] = inputs[k].assoc * hill_pow_d(inputs[k].x, inputs[k].exponent);
        D *= 1.0 + u[k];
    }

    GateEval e;
    if (gate == Gate::OR) {
        e.rate = rates[0] / D;
        for (int k = 0; k < m; ++k) e.dx[k] = -e.rate * du[k] / (1.0 + u[k]);
        return e;
    }

    double N, dN[3];
    if (gate == Gate::AND2) {
        N = rates[0] + rates[1] * u[0] + rates[2] * u[1];
        dN[0] = rates[1];
        dN[1] = rates[2];
        dN[2] = 0.0;
    } else {  // AND3, configuration order: u, v, w, vw, uw, uv
        N = rates[0] + rates[1] * u[0] + rates[2] * u[1] + rates[3] * u[2] +
            rates[4] * u[1] * u[2] + rates[5] * u[0] * u[2] + rates[6] * u[0] * u[1];
        dN[0] = rates[1] + rates[5] * u[2] + rates[6] * u[1];
        dN[1] = rates[2] + rates[4] * u[2] + rates[6] * u[0];
        dN[2] = rates[3] + rates[4] * u[1] + rates[5] * u[0];
    }
    e.rate = N / D;
    for (int k = 0; k < m; ++k)
        e.dx[k] = (dN[k] * (1.0 + u[k]) - N) / ((1.0 + u[k]) * D) * du[k];
    return e;
}

double gate_activation(Gate gate, std::span<const GateInput> inputs,
                       std::span<const double> rates) {
    return gate_eval(gate, inputs, rates).rate;
}

// ---------------------------------------------------------------------------

ModelInstance build_model(const ModelSpec& spec) {
    const int n = family_gene_count(spec.family);
    const int nr = family_rate_count(spec.family);
    if (spec.n_genes != n) {
        std::ostringstream os;
        os << family_name(spec.family) << " requires n_genes=" << n << ", got "
           << spec.n_genes;
        throw std::invalid_argument(os.str());
    }
    const ParamSet& p = spec.params;
    auto need_size = [&](const Vec& v, const char* name) {
        if (v.size() != n)
            throw std::invalid_argument(std::string(name) + " must have one entry per gene");
    };
    need_size(p.b, "b");
    need_size(p.alpha, "alpha");
    need_size(p.beta, "beta");
    need_size(p.d, "d");
    if (spec.family == Family::FourGeneAND) need_size(p.gamma, "gamma");
    if (p.g.rows() != n || p.g.cols() != nr) {
        std::ostringstream os;
        os << "g must be " << n << "x" << nr << " for " << family_name(spec.family);
        throw std::invalid_argument(os.str());
    }
    if (p.h.rows() != n || p.h.cols() != n)
        throw std::invalid_argument("h must be n_genes x n_genes");
    auto non_negative = [](const Vec& v, const char* name) {
        for (int i = 0; i < v.size(); ++i)
            if (!(v[i] >= 0.0))
                throw std::invalid_argument(std::string(name) + " entries must be >= 0");
    };
    non_negative(p.b, "b");
    non_negative(p.alpha, "alpha");
    non_negative(p.beta, "beta");
    if (p.gamma.size()) non_negative(p.gamma, "gamma");
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < nr; ++j)
            if (!(p.g(i, j) >= 0.0)) throw std::invalid_argument("g entries must be >= 0");
    for (int i = 0; i < n; ++i)
        if (!(p.d[i] > 0.0)) throw std::invalid_argument("d entries must be > 0");

    ModelInstance m;
    m.spec_ = spec;
    m.edges_.resize(n);
    auto edge = [&](int gene, int src, const Vec& assoc) {
        double hij = p.h(gene, src);
        if (!(hij >= 1.0)) throw std::invalid_argument("Hill exponents must be >= 1");
        m.edges_[gene].push_back(Edge{src, assoc[gene], hij});
    };
    switch (spec.family) {
        case Family::StandardRepressilator:
            m.gate_ = Gate::OR;  // single input evaluated as a plain Hill factor
            for (int i = 0; i < n; ++i) edge(i, (i + 1) % n, p.alpha);
            break;
        case Family::CrossRepressilatorOR:
            m.gate_ = Gate::OR;
            for (int i = 0; i < n; ++i) {
                edge(i, (i + 1) % n, p.alpha);
                edge(i, (i + 2) % n, p.beta);
            }
            break;
        case Family::CrossRepressilatorAND:
            m.gate_ = Gate::AND2;
            for (int i = 0; i < n; ++i) {
                edge(i, (i + 1) % n, p.alpha);
                edge(i, (i + 2) % n, p.beta);
            }
            break;
        case Family::FiveGeneAND:
            m.gate_ = Gate::AND2;
            for (int i = 0; i < n; ++i) {
                edge(i, (i + 1) % n, p.alpha);
                edge(i, (i + 4) % n, p.beta);
            }
            break;
        case Family::FourGeneAND:
            m.gate_ = Gate::AND3;
            for (int i = 0; i < n; ++i) {
                edge(i, (i + 1) % n, p.alpha);
                edge(i, (i + 2) % n, p.beta);
                edge(i, (i + 3) % n, p.gamma);
            }
            break;
    }
    return m;
}

Vec ModelInstance::rhs(const Vec& x) const {
    Vec out(dim());
    rhs(x, out);
    return out;
}

Mat ModelInstance::jacobian(const Vec& x) const {
    Mat out(dim(), dim());
    jacobian(x, out);
    return out;
}

void ModelInstance::rhs_with(const ParamSet& p, const Vec& x, Vec& out) const {
    const int n = dim();
    if (x.size() != n) throw std::invalid_argument("state dimension mismatch");
    out.resize(n);
    for (int i = 0; i < n; ++i) {
        const auto& ed = edges_[i];
        double production;
        if (spec_.family == Family::StandardRepressilator) {
            double u = p.alpha[i] * hill_pow(x[ed[0].source], ed[0].exponent);
            production = p.g(i, 0) / (1.0 + u);
        } else {
            GateInput in[3];
            for (size_t k = 0; k < ed.size(); ++k) {
                double assoc = k == 0 ? p.alpha[i] : (k == 1 ? p.beta[i] : p.gamma[i]);
                in[k] = GateInput{x[ed[k].source], assoc, ed[k].exponent};
            }
            double rates[7];
            for (int j = 0; j < p.g.cols(); ++j) rates[j] = p.g(i, j);
            production = gate_eval(gate_, std::span<const GateInput>(in, ed.size()),
                                   std::span<const double>(rates, p.g.cols()))
                             .rate;
        }
        out[i] = p.b[i] + production - p.d[i] * x[i];
    }
}

void ModelInstance::jacobian_with(const ParamSet& p, const Vec& x, Mat& out) const {
    const int n = dim();
    if (x.size() != n) throw std::invalid_argument("state dimension mismatch");
    out.setZero(n, n);
    for (int i = 0; i < n; ++i) {
        const auto& ed = edges_[i];
        out(i, i) -= p.d[i];
        if (spec_.family == Family::StandardRepressilator) {
            double xs = x[ed[0].source];
            double u = p.alpha[i] * hill_pow(xs, ed[0].exponent);
            double du = p.alpha[i] * hill_pow_d(xs, ed[0].exponent);
            out(i, ed[0].source) += -p.g(i, 0) * du / ((1.0 + u) * (1.0 + u));
            continue;
        }
        GateInput in[3];
        for (size_t k = 0; k < ed.size(); ++k) {
            double assoc = k == 0 ? p.alpha[i] : (k == 1 ? p.beta[i] : p.gamma[i]);
            in[k] = GateInput{x[ed[k].source], assoc, ed[k].exponent};
        }
        double rates[7];
        for (int j = 0; j < p.g.cols(); ++j) rates[j] = p.g(i, j);
        GateEval e = gate_eval(gate_, std::span<const GateInput>(in, ed.size()),
                               std::span<const double>(rates, p.g.cols()));
        for (size_t k = 0; k < ed.size(); ++k) out(i, ed[k].source) += e.dx[k];
    }
}

ModelInstance with_param(const ModelInstance& model, const std::string& name, double value) {
    ModelSpec spec = model.spec();
    apply_param(spec, spec.params, resolve_param(spec, name), value);
    return build_model(spec);
}

double ModelInstance::state_scale() const {
    const ParamSet& p = spec_.params;
    double s = 0.0;
    for (int i = 0; i < dim(); ++i)
        s = std::max(s, (p.b[i] + p.g.row(i).maxCoeff()) / p.d[i]);
    return s;
}

// ---------------------------------------------------------------------------

ParamAddress resolve_param(const ModelSpec& spec, const std::string& name) {
    size_t pos = 0;
    while (pos < name.size() && !std::isdigit(static_cast<unsigned char>(name[pos]))) ++pos;
    std::string base = name.substr(0, pos);
    int index = -1;
    if (pos < name.size()) {
        try {
            index = std::stoi(name.substr(pos));
        } catch (...) {
            throw std::invalid_argument("bad parameter name: " + name);
        }
        if (index < 1) throw std::invalid_argument("parameter index must be >= 1: " + name);
        --index;  // 1-based in names, 0-based internally
    }

    ParamAddress a;
    a.index = index;
    const int n = family_gene_count(spec.family);
    const int nr = family_rate_count(spec.family);
    auto check = [&](int limit) {
        if (index >= limit) {
            std::ostringstream os;
            os << "parameter " << name << " out of range for " << family_name(spec.family);
            throw std::invalid_argument(os.str());
        }
    };
    if (base == "g") {
        a.field = ParamAddress::Field::Rate;
        check(nr > 1 ? nr : n);
    } else if (base == "alpha") {
        a.field = ParamAddress::Field::Alpha;
        check(n);
    } else if (base == "beta") {
        a.field = ParamAddress::Field::Beta;
        check(n);
    } else if (base == "gamma") {
        if (spec.family != Family::FourGeneAND)
            throw std::invalid_argument(std::string("unknown parameter gamma for family ") +
                                        family_name(spec.family));
        a.field = ParamAddress::Field::Gamma;
        check(n);
    } else if (base == "d") {
        a.field = ParamAddress::Field::Degradation;
        check(n);
    } else if (base == "b") {
        a.field = ParamAddress::Field::Basal;
        check(n);
    } else if (base == "h") {
        a.field = ParamAddress::Field::Hill;
        check(n);
    } else {
        throw std::invalid_argument(std::string("unknown parameter ") + name + " for family " +
                                    family_name(spec.family));
    }
    return a;
}

void apply_param(const ModelSpec& spec, ParamSet& p, const ParamAddress& a, double value) {
    const int nr = family_rate_count(spec.family);
    using F = ParamAddress::Field;
    auto set_vec = [&](Vec& v) {
        if (a.index < 0) v.setConstant(value);
        else v[a.index] = value;
    };
    switch (a.field) {
        case F::Basal: set_vec(p.b); break;
        case F::Alpha: set_vec(p.alpha); break;
        case F::Beta: set_vec(p.beta); break;
        case F::Gamma: set_vec(p.gamma); break;
        case F::Degradation: set_vec(p.d); break;
        case F::Hill:
            if (a.index < 0) p.h.setConstant(value);
            else p.h.row(a.index).setConstant(value);
            break;
        case F::Rate:
            if (a.index < 0) p.g.setConstant(value);
            else if (nr > 1) p.g.col(a.index).setConstant(value);  // shared configuration rate
            else p.g(a.index, 0) = value;
            break;
    }
}

double read_param(const ModelSpec& spec, const ParamSet& p, const ParamAddress& a) {
    const int nr = family_rate_count(spec.family);
    using F = ParamAddress::Field;
    int i = a.index < 0 ? 0 : a.index;
    switch (a.field) {
        case F::Basal: return p.b[i];
        case F::Alpha: return p.alpha[i];
        case F::Beta: return p.beta[i];
        case F::Gamma: return p.gamma[i];
        case F::Degradation: return p.d[i];
        case F::Hill: return p.h(i, (i + 1) % p.h.cols());
        case F::Rate: return nr > 1 ? p.g(0, i) : p.g(i, 0);
    }
    return 0.0;
}

}  // namespace grnlab
