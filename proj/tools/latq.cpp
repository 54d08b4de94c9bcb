// latq: lattice quantization command-line front end.
//
// Subcommands: quantize, compare, bounds, oracle, reduce.
// Exit codes: 0 ok, 1 disagreement / bound violation, 2 input error,
// 3 rank deficiency without regularization.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "latq/csv.hpp"
#include "latq/latq.hpp"
#include "latq/report.hpp"

namespace {

using namespace latq;

constexpr int exit_ok = 0;
constexpr int exit_disagree = 1;
constexpr int exit_input = 2;
constexpr int exit_rank = 3;

constexpr std::uint64_t default_seed = 0x9e3779b97f4a7c15ULL;
constexpr double ill_conditioned = 1e12;

class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path + "'");
    out << text;
}

Matrix load_matrix(const std::string& path, bool header) {
    try {
        return parse_matrix_csv(read_file(path), header);
    } catch (const Error& e) {
        throw InputError(path + ": " + e.what());
    }
}

struct Options {
    std::string weights, calib, target;
    std::string algo = "gptq";
    std::string mu = "0";
    double alpha = 1.0;
    std::string clamp;
    std::string reduce;
    double delta = default_lll_delta;
    std::string out, unimodular, report;
    bool header = false;
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    std::string random;
    std::size_t seeds = 1;
    std::uint64_t seed = default_seed;
    int radius = 2;
};

double resolve_mu(const Options& o, const Matrix& x) {
    if (o.mu == "auto") return auto_mu(x);
    double mu = 0.0;
    try {
        std::size_t used = 0;
        mu = std::stod(o.mu, &used);
        if (used != o.mu.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
        throw InputError("--mu expects a number or 'auto', got '" + o.mu + "'");
    }
    if (!(mu >= 0.0)) throw InputError("--mu must be >= 0");
    return mu;
}

std::optional<double> resolve_reduce(const Options& o) {
    if (o.reduce.empty()) return std::nullopt;
    if (o.reduce != "lll") throw InputError("--reduce supports only 'lll'");
    if (!(o.delta > 0.25 && o.delta < 1.0)) throw InputError("--delta must lie in (0.25, 1)");
    return o.delta;
}

QuantConfig make_config(const Options& o, const Matrix& x) {
    QuantConfig cfg;
    cfg.mu = resolve_mu(o, x);
    cfg.alpha = o.alpha;
    if (!(cfg.alpha > 0.0)) throw InputError("--alpha must be > 0");
    const auto algo = parse_algorithm(o.algo);
    if (!algo) throw InputError("unknown --algo '" + o.algo + "'");
    cfg.algorithm = *algo;
    if (!o.clamp.empty()) {
        const auto colon = o.clamp.find(':');
        if (colon == std::string::npos) throw InputError("--clamp expects LO:HI");
        try {
            cfg.clamp = ClampRange{std::stoll(o.clamp.substr(0, colon)),
                                   std::stoll(o.clamp.substr(colon + 1))};
        } catch (const std::exception&) {
            throw InputError("--clamp expects integer LO:HI, got '" + o.clamp + "'");
        }
        if (cfg.clamp->lo > cfg.clamp->hi) throw InputError("--clamp: LO > HI");
    }
    cfg.lll_delta = resolve_reduce(o);
    return cfg;
}

void check_conditioning(const QLFactors& f, Report& rep) {
    const double c = diagonal_condition(f);
    if (c > ill_conditioned) {
        std::ostringstream w;
        w << "calibration data is extremely ill-conditioned (L diagonal ratio " << c
          << "); consider raising --mu";
        rep.warnings.push_back(w.str());
        std::cerr << "warning: " << w.str() << "\n";
    }
}

void emit_report(const Options& o, Report& rep, std::chrono::steady_clock::time_point start) {
    rep.wall_time_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    if (!o.report.empty()) write_file(o.report, to_json(rep).dump(2));
}

int cmd_quantize(const Options& o) {
    const auto start = std::chrono::steady_clock::now();
    if (o.weights.empty() || o.calib.empty()) throw InputError("quantize needs --weights and --calib");
    const Matrix w = load_matrix(o.weights, o.header);
    const Matrix x = load_matrix(o.calib, o.header);
    if (w.cols() != x.cols())
        throw InputError("weights have " + std::to_string(w.cols()) + " columns, calibration has " +
                         std::to_string(x.cols()));
    const QuantConfig cfg = make_config(o, x);

    const PreparedLattice lat(x, cfg);
    const MatrixQuantResult res = quantize_matrix(w, lat, cfg, o.threads);

    const std::string csv = serialize_matrix_csv(res.v);
    if (!o.out.empty())
        write_file(o.out, csv);
    else
        std::cout << csv;

    Report rep;
    rep.algorithm = std::string(to_string(cfg.algorithm));
    rep.n = x.cols();
    rep.k = x.rows();
    rep.m = w.rows();
    rep.mu = cfg.mu;
    rep.alpha = cfg.alpha;
    if (cfg.lll_delta) rep.delta = *cfg.lll_delta;
    rep.V = res.v;
    rep.error_l2 = std::sqrt(res.total_error2());
    rep.error_regularized = std::sqrt(res.total_error2_regularized());
    // Per-row bound, scaled to the alphabet and summed over rows.
    rep.set_bounds(BoundSummary::from(lat.factors()),
                   cfg.alpha * std::sqrt(static_cast<double>(std::max<std::size_t>(w.rows(), 1))));
    rep.step_coeffs = res.step_coeffs;
    rep.fragile_count = res.fragile_count;
    check_conditioning(lat.factors(), rep);
    if (cfg.clamp) rep.warnings.push_back("clamped output: error bounds apply to the unclamped solution");
    emit_report(o, rep, start);
    std::cerr << "quantized " << w.rows() << "x" << w.cols() << " weights, error_l2 = " << *rep.error_l2
              << ", fragile = " << res.fragile_count << "\n";
    return exit_ok;
}

struct CompareOutcome {
    IntVector gptq_v;
    double error2 = 0.0;
    double bound2 = 0.0;
    double gamma = 0.0;
    std::size_t fragile = 0;
    bool agree = true;
    Vector step_coeffs;
};

CompareOutcome compare_instance(const PreparedLattice& lat, std::span<const double> w, QuantConfig cfg) {
    std::vector<IntVector> outputs;
    std::vector<std::size_t> fragile;
    CompareOutcome out;
    for (Algorithm a : {Algorithm::gptq, Algorithm::gptq_rec, Algorithm::babai, Algorithm::babai_proj_rec}) {
        cfg.algorithm = a;
        QuantResult r = quantize(lat, w, cfg);
        fragile.insert(fragile.end(), r.fragile.begin(), r.fragile.end());
        if (a == Algorithm::gptq) {
            out.gptq_v = r.v;
            out.error2 = r.error_l2 * r.error_l2;
            out.step_coeffs = r.step_coeffs;
        }
        outputs.push_back(std::move(r.v));
    }
    std::sort(fragile.begin(), fragile.end());
    fragile.erase(std::unique(fragile.begin(), fragile.end()), fragile.end());
    out.fragile = fragile.size();
    const auto mask = comparable_mask(outputs, fragile, w.size());
    for (std::size_t i = 0; i < w.size(); ++i)
        if (mask[i])
            for (const auto& o : outputs) out.agree = out.agree && o[i] == outputs.front()[i];
    const auto b = BoundSummary::from(lat.factors());
    out.bound2 = cfg.alpha * cfg.alpha * b.bound_abs_paper * b.bound_abs_paper;
    out.gamma = b.gamma_bound;
    return out;
}

std::pair<std::size_t, std::size_t> parse_shape(const std::string& s) {
    const auto comma = s.find(',');
    if (comma == std::string::npos) throw InputError("--random expects n,k");
    std::size_t n = 0, k = 0;
    try {
        n = std::stoul(s.substr(0, comma));
        k = std::stoul(s.substr(comma + 1));
    } catch (const std::exception&) {
        throw InputError("--random expects integers n,k, got '" + s + "'");
    }
    if (n == 0 || k < n) throw InputError("--random requires 1 <= n <= k");
    return {n, k};
}

int cmd_compare(const Options& o) {
    const auto start = std::chrono::steady_clock::now();
    Report rep;
    rep.algorithm = "compare";
    std::vector<CompareOutcome> outcomes;
    std::size_t n = 0;

    if (!o.random.empty()) {
        const auto [rn, rk] = parse_shape(o.random);
        n = rn;
        rep.n = rn;
        rep.k = rk;
        rep.seed = o.seed;
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        for (std::size_t s = 0; s < o.seeds; ++s) {
            std::mt19937_64 rng(o.seed + s);
            Matrix x(rk, rn);
            for (auto& e : x.entries()) e = unif(rng);
            Vector w(rn);
            for (auto& e : w) e = unif(rng);
            const QuantConfig cfg = make_config(o, x);
            rep.mu = cfg.mu;
            rep.alpha = cfg.alpha;
            const PreparedLattice lat(x, cfg);
            outcomes.push_back(compare_instance(lat, w, cfg));
        }
        rep.m = o.seeds;
    } else {
        if (o.weights.empty() || o.calib.empty())
            throw InputError("compare needs --weights and --calib, or --random n,k");
        const Matrix w = load_matrix(o.weights, o.header);
        const Matrix x = load_matrix(o.calib, o.header);
        if (w.cols() != x.cols()) throw InputError("weights and calibration column counts differ");
        const QuantConfig cfg = make_config(o, x);
        rep.mu = cfg.mu;
        rep.alpha = cfg.alpha;
        if (cfg.lll_delta) rep.delta = *cfg.lll_delta;
        const PreparedLattice lat(x, cfg);
        check_conditioning(lat.factors(), rep);
        for (std::size_t i = 0; i < w.rows(); ++i) outcomes.push_back(compare_instance(lat, w.row(i), cfg));
        n = x.cols();
        rep.n = n;
        rep.k = x.rows();
        rep.m = w.rows();
    }

    IntMatrix V(outcomes.size(), n);
    double err2 = 0.0, bound2 = 0.0, gamma = 0.0;
    std::size_t fragile = 0, disagreements = 0;
    std::vector<Vector> coeffs;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const auto& oc = outcomes[i];
        for (std::size_t j = 0; j < n; ++j) V(i, j) = oc.gptq_v[j];
        err2 += oc.error2;
        bound2 += oc.bound2;
        gamma = std::max(gamma, oc.gamma);
        fragile += oc.fragile;
        disagreements += oc.agree ? 0 : 1;
        coeffs.push_back(oc.step_coeffs);
    }
    rep.V = V;
    rep.error_l2 = std::sqrt(err2);
    rep.bound_abs_paper = std::sqrt(bound2);
    rep.bound_abs_halfstep = 0.5 * std::sqrt(bound2);
    rep.gamma_bound = gamma;
    rep.step_coeffs = coeffs;
    rep.fragile_count = fragile;
    rep.agreement = disagreements == 0;
    emit_report(o, rep, start);

    std::cout << "instances: " << outcomes.size() << ", fragile coordinates: " << fragile
              << ", disagreements: " << disagreements << ", agreement: "
              << (disagreements == 0 ? "true" : "false") << "\n";
    return disagreements == 0 ? exit_ok : exit_disagree;
}

void print_profile(std::ostream& os, const char* label, const BoundSummary& b) {
    os << label << "\n";
    os << "  L_ii:";
    for (double d : b.l_diag) os << " " << d;
    os << "\n";
    os << "  bound_abs_paper    = " << b.bound_abs_paper << "\n";
    os << "  bound_abs_halfstep = " << b.bound_abs_halfstep << "\n";
    os << "  gamma_bound        = " << b.gamma_bound << "\n";
    os << "  gamma_bound_loose  = " << b.gamma_bound_loose << "\n";
}

Matrix solver_basis(const Options& o, const Matrix& x, double& mu) {
    mu = resolve_mu(o, x);
    return mu > 0.0 ? regularize(x, mu) : x;
}

int cmd_bounds(const Options& o) {
    const auto start = std::chrono::steady_clock::now();
    if (o.calib.empty()) throw InputError("bounds needs --calib");
    const Matrix x = load_matrix(o.calib, o.header);
    double mu = 0.0;
    const LatticeBasis basis(solver_basis(o, x, mu));
    const auto reduce = resolve_reduce(o);

    Report rep;
    rep.algorithm = "bounds";
    rep.n = x.cols();
    rep.k = x.rows();
    rep.mu = mu;
    const BoundSummary before = BoundSummary::from(basis.factors());
    rep.set_bounds(before);
    check_conditioning(basis.factors(), rep);
    print_profile(std::cout, "basis", before);
    if (reduce) {
        rep.delta = *reduce;
        const ReducedBasis rb = lll_reduce(basis, *reduce);
        const BoundSummary after = BoundSummary::from(ql_decompose(rb.basis_red));
        rep.reduced = after;
        print_profile(std::cout, "after LLL", after);
    }
    emit_report(o, rep, start);
    return exit_ok;
}

Vector load_row(const std::string& path, bool header, std::size_t expected, const char* what) {
    const Matrix m = load_matrix(path, header);
    if (m.rows() == 1 && m.cols() == expected) return Vector(m.row(0).begin(), m.row(0).end());
    if (m.cols() == 1 && m.rows() == expected) return m.col(0);
    throw InputError(std::string(what) + " must be a single row or column of length " +
                     std::to_string(expected));
}

int cmd_oracle(const Options& o) {
    const auto start = std::chrono::steady_clock::now();
    if (o.calib.empty()) throw InputError("oracle needs --calib");
    if (o.target.empty() == o.weights.empty()) throw InputError("oracle needs exactly one of --target or --weights");
    if (o.radius < 1) throw InputError("--radius must be >= 1");
    const Matrix x = load_matrix(o.calib, o.header);
    if (x.cols() > max_enumeration_dim) throw DimensionTooLarge(x.cols(), max_enumeration_dim);
    double mu = 0.0;
    const LatticeBasis basis(solver_basis(o, x, mu));
    const std::size_t n = x.cols();

    Vector t;
    if (!o.target.empty()) {
        t = load_row(o.target, o.header, x.rows(), "--target");
        if (mu > 0.0) t.resize(t.size() + n, 0.0);
    } else {
        const Vector w = load_row(o.weights, o.header, n, "--weights");
        t = x * w;
        if (mu > 0.0)
            for (double wi : w) t.push_back(mu * wi);
    }

    Report rep;
    rep.algorithm = "babai";
    rep.n = n;
    rep.k = x.rows();
    rep.m = 1;
    rep.mu = mu;

    const auto reduce = resolve_reduce(o);
    IntVector v;
    Vector coeffs;
    std::size_t fragile = 0;
    BoundSummary bounds;
    if (reduce) {
        rep.delta = *reduce;
        const ReducedBasis rb = lll_reduce(basis, *reduce);
        const LatticeBasis reduced(rb.basis_red);
        const CvpSolution s = babai_from_target(reduced, t);
        v = map_solution(rb.u, s.v);
        coeffs = s.step_coeffs;
        fragile = s.fragile.size();
        bounds = BoundSummary::from(reduced.factors());
    } else {
        const CvpSolution s = babai_from_target(basis, t);
        v = s.v;
        coeffs = s.step_coeffs;
        fragile = s.fragile.size();
        bounds = BoundSummary::from(basis.factors());
    }
    const double babai_err = norm2(sub(t, basis.matrix() * v));
    const CvpSolution opt = exact_cvp(basis, t, o.radius);
    if (!opt.certified)
        rep.warnings.push_back("enumeration box radius " + std::to_string(opt.radius) +
                               " could not be certified to contain the optimum");
    const double ratio = opt.error_l2 > 0.0 ? babai_err / opt.error_l2 : (babai_err > 0.0 ? INFINITY : 1.0);

    rep.v = v;
    rep.error_l2 = babai_err;
    rep.set_bounds(bounds);
    rep.step_coeffs = coeffs;
    rep.fragile_count = fragile;
    rep.oracle_error = opt.error_l2;
    rep.oracle_ratio = ratio;
    emit_report(o, rep, start);

    const bool ok = ratio <= bounds.gamma_bound * (1.0 + 1e-12);
    std::cout << std::setprecision(17) << "optimum error: " << opt.error_l2 << "\nbabai error:   " << babai_err
              << "\nratio:         " << ratio << "\ngamma_bound:   " << bounds.gamma_bound << "\n";
    if (!ok) std::cerr << "ratio exceeds gamma_bound\n";
    return ok ? exit_ok : exit_disagree;
}

int cmd_reduce(const Options& o) {
    const auto start = std::chrono::steady_clock::now();
    if (o.calib.empty()) throw InputError("reduce needs --calib");
    if (!(o.delta > 0.25 && o.delta < 1.0)) throw InputError("--delta must lie in (0.25, 1)");
    const Matrix x = load_matrix(o.calib, o.header);
    double mu = 0.0;
    const LatticeBasis basis(solver_basis(o, x, mu));
    const ReducedBasis rb = lll_reduce(basis, o.delta);

    if (!o.out.empty()) write_file(o.out, serialize_matrix_csv(rb.basis_red));
    if (!o.unimodular.empty()) write_file(o.unimodular, serialize_matrix_csv(rb.u));

    Report rep;
    rep.algorithm = "lll";
    rep.n = x.cols();
    rep.k = x.rows();
    rep.mu = mu;
    rep.delta = o.delta;
    const BoundSummary before = BoundSummary::from(basis.factors());
    const BoundSummary after = BoundSummary::from(ql_decompose(rb.basis_red));
    rep.set_bounds(before);
    rep.reduced = after;
    emit_report(o, rep, start);
    print_profile(std::cout, "basis", before);
    print_profile(std::cout, "after LLL", after);
    std::cout << "swaps: " << rb.swaps << "\n";
    return exit_ok;
}

void add_calib(CLI::App* sub, Options& o) {
    sub->add_option("--calib", o.calib, "calibration matrix X (k x n CSV)");
    sub->add_option("--mu", o.mu, "regularizer mu >= 0, or 'auto'");
    sub->add_flag("--header", o.header, "CSV files carry a header line");
    sub->add_option("--report", o.report, "write JSON report here");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lattice-based post-training weight quantization"};
    app.require_subcommand(1);
    Options o;

    auto* quant = app.add_subcommand("quantize", "quantize a weight matrix against calibration data");
    add_calib(quant, o);
    quant->add_option("--weights", o.weights, "weight matrix W (m x n CSV)");
    quant->add_option("--algo", o.algo, "gptq | babai | gptq-rec | babai-proj-rec");
    quant->add_option("--alpha", o.alpha, "alphabet scale (grid alpha*Z)");
    quant->add_option("--clamp", o.clamp, "clamp integers into LO:HI after solving");
    quant->add_option("--reduce", o.reduce, "basis reduction before solving (lll)");
    quant->add_option("--delta", o.delta, "LLL delta");
    quant->add_option("--out", o.out, "output integer CSV (default stdout)");
    quant->add_option("--threads", o.threads, "row-level worker threads");

    auto* cmp = app.add_subcommand("compare", "run all four solvers and check they agree");
    add_calib(cmp, o);
    cmp->add_option("--weights", o.weights, "weight matrix W (m x n CSV)");
    cmp->add_option("--alpha", o.alpha, "alphabet scale");
    cmp->add_option("--random", o.random, "generate instances of shape n,k");
    cmp->add_option("--seeds", o.seeds, "number of generated instances");
    cmp->add_option("--seed", o.seed, "base 64-bit seed");

    auto* bnd = app.add_subcommand("bounds", "print nearest-plane error bounds for a lattice");
    add_calib(bnd, o);
    bnd->add_option("--reduce", o.reduce, "also report bounds after reduction (lll)");
    bnd->add_option("--delta", o.delta, "LLL delta");

    auto* orc = app.add_subcommand("oracle", "compare nearest plane with exhaustive enumeration");
    add_calib(orc, o);
    orc->add_option("--target", o.target, "target vector t (length k CSV)");
    orc->add_option("--weights", o.weights, "weight vector w (length n CSV); t = X w");
    orc->add_option("--radius", o.radius, "initial enumeration radius");
    orc->add_option("--reduce", o.reduce, "reduce before nearest plane (lll)");
    orc->add_option("--delta", o.delta, "LLL delta");

    auto* red = app.add_subcommand("reduce", "LLL-reduce a calibration lattice");
    add_calib(red, o);
    red->add_option("--delta", o.delta, "LLL delta");
    red->add_option("--out", o.out, "reduced basis CSV");
    red->add_option("--unimodular", o.unimodular, "unimodular transform CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_input;
    }

    try {
        if (quant->parsed()) return cmd_quantize(o);
        if (cmp->parsed()) return cmd_compare(o);
        if (bnd->parsed()) return cmd_bounds(o);
        if (orc->parsed()) return cmd_oracle(o);
        if (red->parsed()) return cmd_reduce(o);
    } catch (const RankDeficient& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_rank;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_input;
    }
    return exit_input;
}
