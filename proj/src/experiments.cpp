#include "floweng/experiments.hpp"

#include "floweng/chern.hpp"
#include "floweng/flow.hpp"
#include "floweng/hfe.hpp"
#include "floweng/lambda_system.hpp"
#include "floweng/mode_algebra.hpp"
#include "floweng/models.hpp"
#include "floweng/propagator.hpp"

#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <mutex>
#include <numbers>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <thread>
#include <utility>
#include <vector>

namespace floweng {

namespace {

using nlohmann::json;

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// config schema

struct KeyDoc {
    const char* key;
    const char* type;
    const char* doc;
    json defval;  // null when required
};

const std::vector<KeyDoc> kTopLevelKeys = {
    {"experiment", "string",
     "one of flow-check, lambda-design, eta-sweep, heating, chern-diagram, quench", nullptr},
    {"output_dir", "string", "directory for CSV artifacts and manifest.json", nullptr},
    {"seed", "unsigned", "RNG seed; required for flow-check, eta-sweep, heating", nullptr},
    {"parallelism", "int >= 1", "worker threads for independent rows", 1},
    {"parameters", "object", "experiment-specific knobs, see below", json::object()},
};

const std::vector<KeyDoc> kFlowCheckKeys = {
    {"count", "int >= 1", "number of random instances", 20},
    {"dim_min", "int >= 2", "smallest matrix dimension", 3},
    {"dim_max", "int >= dim_min", "largest matrix dimension", 6},
    {"gamma", "double > 0", "drive-strength scale |h| / w1", 0.02},
    {"omega1", "double > 0", "driving frequency", 20.0},
    {"m1_max", "int >= 1", "driving-harmonic cutoff of the random series", 1},
    {"m2_max", "int >= 0", "slow-harmonic cutoff of the random series", 1},
    {"flow_rtol", "double > 0", "flow integrator relative tolerance", 1e-9},
    {"flow_s_max", "double > 0", "flow parameter budget", 500.0},
};

const std::vector<KeyDoc> kLambdaDesignKeys = {
    {"harmonics", "int >= 0", "P: drive components run over [-P, P]", 3},
    {"eta", "double > 0", "slow-to-fast frequency ratio w2/w1", 0.37796447300922720},
    {"omega1", "double > 0", "fast frequency", 1.0},
    {"samples", "int", "least-squares grid size over one slow period", 256},
    {"center_fraction", "double in (0,1)", "Gaussian center as a fraction of the period", 0.5},
    {"width_fraction", "double > 0", "Gaussian sigma as a fraction of the period", 0.125},
    {"amplitude", "double > 0", "Gaussian peak value of the target splitting", 1.0},
    {"max_iterations", "int >= 1", "Gauss-Newton iteration cap", 400},
};

const std::vector<KeyDoc> kEtaSweepKeys = {
    {"model", "string", "spin-chain or fermi-hubbard", "spin-chain"},
    {"sites", "int >= 2", "chain length", 8},
    {"n_up", "int >= 0", "spin-up filling (fermi-hubbard only)", 1},
    {"n_down", "int >= 0", "spin-down filling (fermi-hubbard only)", 1},
    {"momentum_project", "bool", "restrict to the zero-quasi-momentum sector", true},
    {"gamma", "double > 0", "drive strength for every operator", 0.02},
    {"m1_max", "int >= 0", "driving-harmonic cutoff M1", 3},
    {"m2_max", "int >= 0", "slow-harmonic cutoff M2", 2},
    {"omega1", "double > 0", "driving frequency", 20.0},
    {"eta_min", "double > 0", "lower edge of the open eta interval", 0.05},
    {"eta_max", "double", "upper edge of the open eta interval", 1.1},
    {"eta_points", "int >= 1", "grid size (midpoint rule, endpoints excluded)", 60},
    {"order", "int in {0,1}", "effective-Hamiltonian order", 1},
    {"propagation_tol", "double > 0", "substep-refinement tolerance", 1e-8},
};

const std::vector<KeyDoc> kHeatingKeys = {
    {"model", "string", "spin-chain or fermi-hubbard", "spin-chain"},
    {"sites", "int >= 2", "chain length", 8},
    {"n_up", "int >= 0", "spin-up filling (fermi-hubbard only)", 1},
    {"n_down", "int >= 0", "spin-down filling (fermi-hubbard only)", 1},
    {"momentum_project", "bool", "restrict to the zero-quasi-momentum sector", true},
    {"gamma", "double > 0", "drive strength for every operator", 0.06},
    {"m1_max", "int >= 0", "driving-harmonic cutoff M1", 3},
    {"m2_max", "int >= 0", "slow-harmonic cutoff M2", 1},
    {"omega1", "double > 0", "driving frequency", 20.0},
    {"eta", "double > 0", "slow-to-fast frequency ratio", 0.35355339059327373},
    {"periods", "int >= 1", "number of stroboscopic periods K", 19},
    {"order", "int in {0,1}", "effective-Hamiltonian order", 1},
    {"propagation_tol", "double > 0", "substep-refinement tolerance", 1e-8},
};

const std::vector<KeyDoc> kChernDiagramKeys = {
    {"omega1", "double > 0", "driving frequency of the shaking", 1.0},
    {"delta", "double != 0", "sublattice onsite splitting", 1.0},
    {"gamma_quench", "double >= 0", "tunneling decay rate", 0.05},
    {"q", "array[3] of double", "shaking amplitudes of the three tones", json::array({1.0, 0.8, 0.6})},
    {"delta_x", "array[3] of double", "x phases of the three tones", json::array({0.0, 0.7, 1.9})},
    {"phi_min", "double", "smallest x-y phase offset (delta' = delta - phi)", -2.2},
    {"phi_max", "double", "largest phase offset", 2.2},
    {"phi_points", "int >= 1", "rows of the diagram grid", 50},
    {"j0_min", "double > 0", "smallest initial tunneling rate", 0.2},
    {"j0_max", "double", "largest initial tunneling rate", 2.2},
    {"j0_points", "int >= 1", "columns of the diagram grid", 50},
    {"n_cut", "int >= 2", "harmonic cutoff of the coefficient sums", 12},
    {"gap_tol_rel", "double > 0", "phase-boundary tolerance relative to |delta|", 1e-8},
};

const std::vector<KeyDoc> kQuenchKeys = {
    {"omega1", "double > 0", "driving frequency of the shaking", 1.0},
    {"delta", "double != 0", "sublattice onsite splitting", 1.0},
    {"gamma_quench", "double > 0", "tunneling decay rate", 0.1},
    {"j0", "double > 0", "initial tunneling rate", 1.6},
    {"q", "array[3] of double", "seed shaking amplitudes", json::array({1.0, 1.2013, 0.5682})},
    {"delta_x", "array[3] of double", "seed x phases", json::array({0.0, -3.141, -2.7119})},
    {"delta_y", "array[3] of double", "seed y phases", json::array({-1.5707963267948966, 1.532, -4.2425})},
    {"fine_tune", "bool", "solve the tunneling-isotropy condition before the quench", true},
    {"t_max", "double > 0", "end of the time grid", 30.0},
    {"t_points", "int >= 2", "grid size", 100},
    {"n_cut", "int >= 2", "harmonic cutoff of the coefficient sums", 12},
    {"gap_tol_rel", "double > 0", "phase-boundary tolerance relative to |delta|", 1e-8},
};

const std::vector<std::pair<const char*, const std::vector<KeyDoc>*>> kExperiments = {
    {"flow-check", &kFlowCheckKeys},   {"lambda-design", &kLambdaDesignKeys},
    {"eta-sweep", &kEtaSweepKeys},     {"heating", &kHeatingKeys},
    {"chern-diagram", &kChernDiagramKeys}, {"quench", &kQuenchKeys},
};

bool needs_seed(const std::string& experiment) {
    return experiment == "flow-check" || experiment == "eta-sweep" || experiment == "heating";
}

void check_type(const json& v, const std::string& path, const char* type) {
    const std::string t = type;
    bool ok = false;
    if (t.rfind("int", 0) == 0)
        ok = v.is_number_integer();
    else if (t.rfind("unsigned", 0) == 0)
        ok = v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
    else if (t.rfind("double", 0) == 0)
        ok = v.is_number();
    else if (t.rfind("bool", 0) == 0)
        ok = v.is_boolean();
    else if (t.rfind("string", 0) == 0)
        ok = v.is_string();
    else if (t.rfind("array[3] of double", 0) == 0) {
        ok = v.is_array() && v.size() == 3;
        if (ok)
            for (const auto& e : v) ok = ok && e.is_number();
    } else if (t.rfind("object", 0) == 0)
        ok = v.is_object();
    if (!ok) throw ConfigError("config: field '" + path + "' must be " + type);
}

json fill_section(const json& given, const std::vector<KeyDoc>& keys, const std::string& prefix) {
    for (const auto& item : given.items()) {
        bool known = false;
        for (const auto& k : keys)
            if (item.key() == k.key) known = true;
        if (!known) throw ConfigError("config: unknown key '" + prefix + item.key() + "'");
    }
    json out = json::object();
    for (const auto& k : keys) {
        if (given.contains(k.key)) {
            check_type(given.at(k.key), prefix + k.key, k.type);
            out[k.key] = given.at(k.key);
        } else if (!k.defval.is_null()) {
            out[k.key] = k.defval;
        }
    }
    return out;
}

}  // namespace

std::string schema_text() {
    std::ostringstream out;
    out << "floweng config reference (JSON object)\n\n";
    out << "top level:\n";
    for (const auto& k : kTopLevelKeys) {
        out << "  " << k.key << "  (" << k.type << ")";
        if (!k.defval.is_null()) out << "  default " << k.defval.dump();
        out << "\n      " << k.doc << "\n";
    }
    for (const auto& [name, keys] : kExperiments) {
        out << "\nparameters for " << name << ":\n";
        for (const auto& k : *keys) {
            out << "  " << k.key << "  (" << k.type << ")";
            if (!k.defval.is_null()) out << "  default " << k.defval.dump();
            out << "\n      " << k.doc << "\n";
        }
    }
    out << "\nenvironment: " << kOutputRootEnv
        << " redirects relative output_dir values under the given root.\n";
    out << "exit codes: 0 success, 2 config validation failure, 3 numerical failure.\n";
    return out.str();
}

json validate_config(const json& config) {
    if (!config.is_object()) throw ConfigError("config: top level must be a JSON object");
    for (const auto& item : config.items()) {
        bool known = false;
        for (const auto& k : kTopLevelKeys)
            if (item.key() == k.key) known = true;
        if (!known) throw ConfigError("config: unknown key '" + item.key() + "'");
    }
    if (!config.contains("experiment"))
        throw ConfigError("config: missing required key 'experiment'");
    check_type(config.at("experiment"), "experiment", "string");
    const std::string experiment = config.at("experiment").get<std::string>();

    const std::vector<KeyDoc>* keys = nullptr;
    for (const auto& [name, k] : kExperiments)
        if (experiment == name) keys = k;
    if (!keys)
        throw ConfigError("config: unknown experiment '" + experiment + "'");

    if (!config.contains("output_dir"))
        throw ConfigError("config: missing required key 'output_dir'");
    check_type(config.at("output_dir"), "output_dir", "string");
    if (config.at("output_dir").get<std::string>().empty())
        throw ConfigError("config: output_dir must not be empty");

    if (needs_seed(experiment) && !config.contains("seed"))
        throw ConfigError("config: experiment '" + experiment + "' requires a seed");

    json out = json::object();
    out["experiment"] = experiment;
    out["output_dir"] = config.at("output_dir");
    if (config.contains("seed")) {
        check_type(config.at("seed"), "seed", "unsigned");
        out["seed"] = config.at("seed");
    }
    if (config.contains("parallelism")) {
        check_type(config.at("parallelism"), "parallelism", "int");
        if (config.at("parallelism").get<int>() < 1)
            throw ConfigError("config: parallelism must be >= 1");
        out["parallelism"] = config.at("parallelism");
    } else {
        out["parallelism"] = 1;
    }
    out["parameters"] = fill_section(config.contains("parameters") ? config.at("parameters")
                                                                   : json::object(),
                                     *keys, "parameters.");
    return out;
}

namespace {

// ---------------------------------------------------------------------------
// small helpers shared by the runners

void parallel_map(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_lock;
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> hold(failure_lock);
                if (!failure) failure = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < threads - 1; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

class CsvFile {
public:
    CsvFile(const std::filesystem::path& path, const std::string& header) : out_(path) {
        if (!out_) throw std::runtime_error("cannot open " + path.string());
        out_ << header << '\n';
    }
    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

// deterministic uniform draw on [0,1) from the raw 64-bit stream
double u01(std::mt19937_64& eng) { return static_cast<double>(eng() >> 11) * 0x1.0p-53; }

json drive_to_json(const DriveSpec& d, std::uint64_t seed) {
    json coeffs = json::array();
    for (const auto& [pq, a] : d.coeffs)
        coeffs.push_back(json::array({pq.first, pq.second, a.real(), a.imag()}));
    json out;
    out["seed"] = seed;
    out["gamma_strength"] = d.gamma_strength;
    out["m1_max"] = d.m1_max;
    out["m2_max"] = d.m2_max;
    out["coefficients"] = std::move(coeffs);
    return out;
}

ModelInstance model_from_params(const json& p) {
    const std::string kind = p.at("model").get<std::string>();
    const int sites = p.at("sites").get<int>();
    const bool project = p.at("momentum_project").get<bool>();
    if (kind == "spin-chain") return build_spin_chain(sites, project);
    if (kind == "fermi-hubbard")
        return build_fermi_hubbard(sites, p.at("n_up").get<int>(), p.at("n_down").get<int>(),
                                   project);
    throw ConfigError("config: model must be spin-chain or fermi-hubbard");
}

std::vector<DriveSpec> drives_from_params(const json& p, std::uint64_t seed, double eta,
                                          std::size_t count) {
    const double w1 = p.at("omega1").get<double>();
    FrequencyBasis basis({w1, eta * w1});
    std::vector<DriveSpec> drives;
    for (std::size_t k = 0; k < count; ++k) {
        DriveSpec d = random_drive(p.at("gamma").get<double>(), p.at("m1_max").get<int>(),
                                   p.at("m2_max").get<int>(), seed + k, basis);
        // gamma is the ratio of peak drive amplitude to drive frequency, so
        // the raw coefficient table is rescaled to unit peak
        normalize_drive_peak(d);
        drives.push_back(std::move(d));
    }
    return drives;
}

// ---------------------------------------------------------------------------
// flow-check

json run_flow_check(const json& cfg, const std::filesystem::path& out_dir) {
    const json& p = cfg.at("parameters");
    const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
    const int count = p.at("count").get<int>();
    const int dim_min = p.at("dim_min").get<int>();
    const int dim_max = p.at("dim_max").get<int>();
    const double gamma = p.at("gamma").get<double>();
    const double w1 = p.at("omega1").get<double>();
    const int m1_max = p.at("m1_max").get<int>();
    const int m2_max = p.at("m2_max").get<int>();
    if (dim_min < 2 || dim_max < dim_min)
        throw ConfigError("config: flow-check needs 2 <= dim_min <= dim_max");

    FlowOptions flow_opts;
    flow_opts.rtol = p.at("flow_rtol").get<double>();
    flow_opts.s_max = p.at("flow_s_max").get<double>();

    // frequency ratios near these values make some attenuation rates
    // |m.w|/w1 impractically small for the integration budget; the 1/2
    // window is wider because the (1,-2) product mode decays at |1 - 2 eta|
    const std::vector<std::pair<double, double>> avoid = {
        {1.0 / 6, 0.02}, {1.0 / 5, 0.02}, {1.0 / 4, 0.02}, {1.0 / 3, 0.02}, {2.0 / 5, 0.02},
        {1.0 / 2, 0.06}, {3.0 / 5, 0.02}, {2.0 / 3, 0.02}, {3.0 / 4, 0.02}, {4.0 / 5, 0.02}};

    std::filesystem::create_directories(out_dir / "records");
    CsvFile csv(out_dir / "flow_check.csv",
                "instance,dim,eta,omega1,residual,residual_scaled,ratio");

    std::vector<double> ratios;
    for (int i = 0; i < count; ++i) {
        std::mt19937_64 eng(seed + std::uint64_t(i));
        const int dim = dim_min + int(u01(eng) * (dim_max - dim_min + 1));
        double eta = 0.0;
        for (;;) {
            eta = 0.15 + 0.7 * u01(eng);
            bool clear = true;
            for (auto [r, w] : avoid)
                if (std::abs(eta - r) < w) clear = false;
            if (clear) break;
        }

        FourierOperator::TermMap terms;
        auto random_matrix = [&]() {
            CMatrix g(dim, dim);
            for (int r = 0; r < dim; ++r)
                for (int c = 0; c < dim; ++c) g(r, c) = Complex(u01(eng) - 0.5, u01(eng) - 0.5);
            return g;
        };
        for (int m1 = 0; m1 <= m1_max; ++m1)
            for (int m2 = -m2_max; m2 <= m2_max; ++m2) {
                if (m1 == 0 && m2 < 0) continue;
                CMatrix g = random_matrix();
                if (m1 == 0 && m2 == 0) {
                    CMatrix h = 0.5 * (g + g.adjoint().eval());
                    terms[ModeIndex({0, 0})] = (gamma * w1 / h.norm()) * h;
                    continue;
                }
                g *= gamma * w1 / g.norm();
                terms[ModeIndex({m1, m2})] = g;
                terms[ModeIndex({-m1, -m2})] = g.adjoint();
            }

        auto residual_at = [&](const FrequencyBasis& basis) {
            FourierOperator h = FourierOperator::from_terms(dim, basis, terms);
            const FourierOperator flow_eff = integrate_flow(h, default_flow_f, flow_opts).effective;
            const FourierOperator closed = effective_hamiltonian(h, 1);
            const double scale = effective_hamiltonian(h, 0).total_norm();
            return std::pair<double, FourierOperator>(
                (flow_eff - closed).total_norm() / scale, flow_eff);
        };

        const FrequencyBasis base({w1, eta * w1});
        const auto [res_base, eff_base] = residual_at(base);
        const auto [res_scaled, eff_scaled] = residual_at(base.scaled(2.0));
        const double ratio = res_base / res_scaled;
        ratios.push_back(ratio);

        {
            std::ofstream rec(out_dir / "records" /
                              ("flow_effective_" + std::to_string(i) + ".record"));
            eff_base.write_record(rec);
        }
        csv.row({std::to_string(i), std::to_string(dim), fmt17(eta), fmt17(w1), fmt17(res_base),
                 fmt17(res_scaled), fmt17(ratio)});
    }

    json extra;
    extra["richardson_ratios"] = ratios;
    double lo = ratios.empty() ? 0.0 : ratios.front();
    double hi = lo;
    for (double r : ratios) {
        lo = std::min(lo, r);
        hi = std::max(hi, r);
    }
    extra["richardson_ratio_min"] = lo;
    extra["richardson_ratio_max"] = hi;
    extra["outputs"] = json::array({"flow_check.csv", "records/"});
    return extra;
}

// ---------------------------------------------------------------------------
// lambda-design

json run_lambda_design(const json& cfg, const std::filesystem::path& out_dir) {
    const json& p = cfg.at("parameters");
    DesignOptions opts;
    opts.harmonics = p.at("harmonics").get<int>();
    opts.eta = p.at("eta").get<double>();
    opts.omega1 = p.at("omega1").get<double>();
    opts.samples = p.at("samples").get<int>();
    opts.max_iterations = p.at("max_iterations").get<int>();

    const double period = 2.0 * std::numbers::pi / (opts.eta * opts.omega1);
    const double center = p.at("center_fraction").get<double>() * period;
    const double sigma = p.at("width_fraction").get<double>() * period;
    const double amplitude = p.at("amplitude").get<double>();
    auto target = [=](double t) {
        const double u = (t - center) / sigma;
        return amplitude * std::exp(-0.5 * u * u);
    };

    const DesignResult result = design_drive(target, opts);

    CsvFile csv(out_dir / "lambda_design.csv",
                "t,target,omega_e,omega_e_quasistatic,re_omega,im_omega");
    for (std::size_t i = 0; i < result.times.size(); ++i) {
        Complex om{0.0, 0.0};
        for (int k = -opts.harmonics; k <= opts.harmonics; ++k)
            om += result.drive.omega_at(k) *
                  std::exp(Complex(0.0, k * result.drive.omega2 * result.times[i]));
        csv.row({fmt17(result.times[i]), fmt17(result.target[i]), fmt17(result.achieved[i]),
                 fmt17(result.quasistatic[i]), fmt17(om.real()), fmt17(om.imag())});
    }

    {
        std::ofstream rec(out_dir / "lambda_operator.record");
        build_lambda_operator(result.drive).write_record(rec);
    }

    json extra;
    extra["max_deviation"] = result.max_deviation;
    extra["symmetry_defect"] = result.symmetry_defect;
    extra["iterations"] = result.iterations;
    extra["converged"] = result.converged;
    extra["final_cost"] = result.cost;
    json om_coeffs = json::array();
    for (int k = -opts.harmonics; k <= opts.harmonics; ++k)
        om_coeffs.push_back(json::array(
            {k, result.drive.omega_at(k).real(), result.drive.omega_at(k).imag()}));
    extra["omega_components"] = std::move(om_coeffs);
    extra["outputs"] = json::array({"lambda_design.csv", "lambda_operator.record"});
    return extra;
}

// ---------------------------------------------------------------------------
// eta-sweep

json run_eta_sweep(const json& cfg, const std::filesystem::path& out_dir) {
    const json& p = cfg.at("parameters");
    const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
    const ModelInstance model = model_from_params(p);
    const auto drives =
        drives_from_params(p, seed, 0.5 /* placeholder ratio */, model.operator_table.size());

    const double eta_min = p.at("eta_min").get<double>();
    const double eta_max = p.at("eta_max").get<double>();
    const int points = p.at("eta_points").get<int>();
    if (!(eta_max > eta_min)) throw ConfigError("config: eta_max must exceed eta_min");
    std::vector<double> grid(points);
    for (int i = 0; i < points; ++i)
        grid[i] = eta_min + (eta_max - eta_min) * (i + 0.5) / points;

    SweepOptions opts;
    opts.order = p.at("order").get<int>();
    opts.propagation.tolerance = p.at("propagation_tol").get<double>();
    if (opts.order != 0 && opts.order != 1)
        throw ConfigError("config: order must be 0 or 1");

    std::vector<SweepRow> rows(grid.size());
    parallel_map(grid.size(), cfg.at("parallelism").get<int>(), [&](std::size_t i) {
        const double eta = grid[i];
        rows[i] = infidelity_sweep(model, drives, std::span<const double>(&eta, 1), opts)[0];
    });

    CsvFile csv(out_dir / "sweep.csv", "eta,gamma,infidelity,discarded_norm,flags");
    for (const auto& row : rows) {
        std::string flags = row.flags;
        for (char& c : flags)
            if (c == ',') c = ';';
        csv.row({fmt17(row.eta), fmt17(row.gamma), fmt17(row.infidelity),
                 fmt17(row.discarded_norm), flags});
    }

    json extra;
    json drive_records = json::array();
    for (std::size_t k = 0; k < drives.size(); ++k)
        drive_records.push_back(drive_to_json(drives[k], seed + k));
    extra["drives"] = std::move(drive_records);
    extra["model_dim"] = model.dim;
    int flagged = 0;
    for (const auto& row : rows)
        if (!row.flags.empty()) ++flagged;
    extra["flagged_rows"] = flagged;
    extra["outputs"] = json::array({"sweep.csv"});
    return extra;
}

// ---------------------------------------------------------------------------
// heating

json run_heating(const json& cfg, const std::filesystem::path& out_dir) {
    const json& p = cfg.at("parameters");
    const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
    const ModelInstance model = model_from_params(p);
    const double eta = p.at("eta").get<double>();
    const auto drives = drives_from_params(p, seed, eta, model.operator_table.size());

    HeatingOptions opts;
    opts.periods = p.at("periods").get<int>();
    opts.order = p.at("order").get<int>();
    opts.propagation.tolerance = p.at("propagation_tol").get<double>();
    if (opts.order != 0 && opts.order != 1)
        throw ConfigError("config: order must be 0 or 1");

    const auto rows = heating_trace(model, drives, opts);

    CsvFile csv(out_dir / "heating.csv", "k,t,energy_driven,energy_effective");
    for (const auto& row : rows)
        csv.row({std::to_string(row.k), fmt17(row.t), fmt17(row.energy_driven),
                 fmt17(row.energy_effective)});

    {
        const FourierOperator h = assemble_fourier_hamiltonian(model, drives);
        const FourierOperator h_eff = effective_hamiltonian(h, opts.order);
        std::ofstream rec(out_dir / "h_effective.record");
        h_eff.write_record(rec);
    }

    json extra;
    json drive_records = json::array();
    for (std::size_t k = 0; k < drives.size(); ++k)
        drive_records.push_back(drive_to_json(drives[k], seed + k));
    extra["drives"] = std::move(drive_records);
    extra["model_dim"] = model.dim;
    extra["eta"] = eta;
    extra["outputs"] = json::array({"heating.csv", "h_effective.record"});
    return extra;
}

// ---------------------------------------------------------------------------
// chern-diagram

ShakingProfile profile_from_params(const json& p, bool with_delta_y) {
    ShakingProfile profile;
    profile.omega1 = p.at("omega1").get<double>();
    for (int a = 0; a < 3; ++a) {
        profile.q[std::size_t(a)] = p.at("q").at(std::size_t(a)).get<double>();
        profile.delta_x[std::size_t(a)] = p.at("delta_x").at(std::size_t(a)).get<double>();
        if (with_delta_y)
            profile.delta_y[std::size_t(a)] = p.at("delta_y").at(std::size_t(a)).get<double>();
    }
    return profile;
}

json run_chern_diagram(const json& cfg, const std::filesystem::path& out_dir) {
    const json& p = cfg.at("parameters");
    const double delta = p.at("delta").get<double>();
    if (delta == 0.0) throw ConfigError("config: delta must be nonzero");
    const double gamma_quench = p.at("gamma_quench").get<double>();
    const int n_cut = p.at("n_cut").get<int>();
    const double gap_tol = p.at("gap_tol_rel").get<double>() * std::abs(delta);
    const ShakingProfile base = profile_from_params(p, false);

    const int phi_points = p.at("phi_points").get<int>();
    const int j0_points = p.at("j0_points").get<int>();
    const double phi_min = p.at("phi_min").get<double>();
    const double phi_max = p.at("phi_max").get<double>();
    const double j0_min = p.at("j0_min").get<double>();
    const double j0_max = p.at("j0_max").get<double>();
    if (!(j0_max > j0_min) || !(phi_max > phi_min))
        throw ConfigError("config: diagram ranges must be increasing");

    struct RowBlock {
        std::vector<std::array<double, 3>> cells;  // x, y, chern
        double dual_gap_diff = 0.0;
    };
    std::vector<RowBlock> blocks{std::size_t(phi_points)};

    parallel_map(std::size_t(phi_points), cfg.at("parallelism").get<int>(), [&](std::size_t i) {
        const double phi = phi_points == 1
                               ? phi_min
                               : phi_min + (phi_max - phi_min) * double(i) / (phi_points - 1);
        ShakingProfile profile = base;
        for (int a = 0; a < 3; ++a)
            profile.delta_y[std::size_t(a)] = profile.delta_x[std::size_t(a)] - phi;
        const CoefficientSet coeffs =
            stable_coefficient_set(profile, LatticeGeometry::honeycomb(), delta, n_cut);
        const KappaSet kappa = kappa_parameters(coeffs, gamma_quench);

        RowBlock block;
        block.cells.reserve(std::size_t(j0_points));
        for (int jcol = 0; jcol < j0_points; ++jcol) {
            const double j0 = j0_points == 1
                                  ? j0_min
                                  : j0_min + (j0_max - j0_min) * double(jcol) / (j0_points - 1);
            const GapPair via_kappa = gaps_from_kappa(kappa, j0, delta, profile.omega1);
            const GapPair via_params = gaps_from_effective(
                effective_params(coeffs, j0, gamma_quench, delta, profile.omega1, 0.0));
            block.dual_gap_diff = std::max(
                block.dual_gap_diff, std::max(std::abs(via_kappa.h_plus - via_params.h_plus),
                                              std::abs(via_kappa.h_minus - via_params.h_minus)));
            const int c = chern_number(via_kappa, gap_tol);
            block.cells.push_back({j0 * j0 * kappa.kappa_plus / (profile.omega1 * delta),
                                   j0 * j0 * kappa.kappa_minus / (profile.omega1 * delta),
                                   double(c)});
        }
        blocks[i] = std::move(block);
    });

    CsvFile csv(out_dir / "phase_diagram.csv", "x,y,chern");
    std::set<int> values;
    double dual = 0.0;
    for (const auto& block : blocks) {
        dual = std::max(dual, block.dual_gap_diff);
        for (const auto& cell : block.cells) {
            values.insert(int(cell[2]));
            csv.row({fmt17(cell[0]), fmt17(cell[1]), std::to_string(int(cell[2]))});
        }
    }

    json extra;
    extra["max_dual_gap_difference"] = dual;
    extra["chern_values"] = json(values);
    extra["outputs"] = json::array({"phase_diagram.csv"});
    return extra;
}

// ---------------------------------------------------------------------------
// quench

json run_quench(const json& cfg, const std::filesystem::path& out_dir) {
    const json& p = cfg.at("parameters");
    QuenchSettings settings;
    settings.j0 = p.at("j0").get<double>();
    settings.gamma_quench = p.at("gamma_quench").get<double>();
    settings.delta = p.at("delta").get<double>();
    settings.gap_tol_rel = p.at("gap_tol_rel").get<double>();
    settings.n_cut = p.at("n_cut").get<int>();
    if (settings.delta == 0.0) throw ConfigError("config: delta must be nonzero");

    ShakingProfile profile = profile_from_params(p, true);
    json extra;
    if (p.at("fine_tune").get<bool>()) {
        FineTuneOptions opts;
        opts.delta = settings.delta;
        opts.n_cut = settings.n_cut;
        const FineTuneResult tuned =
            solve_fine_tune(settings.gamma_quench / profile.omega1, profile, opts);
        profile = tuned.profile;
        extra["fine_tune_residual"] = tuned.residual;
        extra["fine_tune_iterations"] = tuned.iterations;
    }

    const int points = p.at("t_points").get<int>();
    const double t_max = p.at("t_max").get<double>();
    std::vector<double> grid(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) grid[std::size_t(i)] = t_max * double(i) / (points - 1);

    const auto rows = quench_trajectory(profile, settings, grid);
    CsvFile csv(out_dir / "trajectory.csv", "t,x,y,chern");
    std::set<int> values;
    for (const auto& row : rows) {
        values.insert(row.chern);
        csv.row({fmt17(row.t), fmt17(row.x), fmt17(row.y), std::to_string(row.chern)});
    }

    json prof;
    prof["omega1"] = profile.omega1;
    prof["q"] = profile.q;
    prof["delta_x"] = profile.delta_x;
    prof["delta_y"] = profile.delta_y;
    extra["profile"] = std::move(prof);
    extra["chern_values"] = json(values);
    extra["outputs"] = json::array({"trajectory.csv"});
    return extra;
}

}  // namespace

RunOutcome run_experiment(const nlohmann::json& config) {
    const json cfg = validate_config(config);
    const std::string experiment = cfg.at("experiment").get<std::string>();

    std::filesystem::path out_dir(cfg.at("output_dir").get<std::string>());
    if (out_dir.is_relative()) {
        if (const char* root = std::getenv(kOutputRootEnv); root && *root)
            out_dir = std::filesystem::path(root) / out_dir;
    }
    std::filesystem::create_directories(out_dir);

    const auto start = std::chrono::steady_clock::now();
    json extra;
    if (experiment == "flow-check")
        extra = run_flow_check(cfg, out_dir);
    else if (experiment == "lambda-design")
        extra = run_lambda_design(cfg, out_dir);
    else if (experiment == "eta-sweep")
        extra = run_eta_sweep(cfg, out_dir);
    else if (experiment == "heating")
        extra = run_heating(cfg, out_dir);
    else if (experiment == "chern-diagram")
        extra = run_chern_diagram(cfg, out_dir);
    else
        extra = run_quench(cfg, out_dir);
    const auto stop = std::chrono::steady_clock::now();

    json manifest;
    manifest["experiment"] = experiment;
    manifest["config"] = cfg;
    manifest["library_version"] = kLibraryVersion;
    manifest["wall_time_seconds"] = std::chrono::duration<double>(stop - start).count();
    manifest["results"] = extra;

    std::ofstream out(out_dir / "manifest.json");
    out << manifest.dump(2) << '\n';

    return {out_dir, manifest};
}

}  // namespace floweng
