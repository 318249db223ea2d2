#include "dppc/scenario.hpp"

#include "dppc/errors.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <initializer_list>
#include <sstream>

namespace dppc {

namespace {

using json = nlohmann::json;

[[noreturn]] void schema_error(const std::string& path, const std::string& what) {
    throw ConfigError("scenario field '" + path + "': " + what);
}

std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

std::string index(const std::string& path, std::size_t i) {
    return path + "[" + std::to_string(i) + "]";
}

void require_object(const json& j, const std::string& path) {
    if (!j.is_object()) {
        schema_error(path, "expected an object");
    }
}

void only_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : keys) {
            known = known || item.key() == k;
        }
        if (!known) {
            schema_error(join(path, item.key()), "unknown field");
        }
    }
}

double number(const json& j, const std::string& path) {
    if (!j.is_number()) {
        schema_error(path, "expected a number");
    }
    return j.get<double>();
}

double number(const json& obj, const std::string& path, const char* key) {
    if (!obj.contains(key)) {
        schema_error(join(path, key), "missing required field");
    }
    return number(obj.at(key), join(path, key));
}

double number_or(const json& obj, const std::string& path, const char* key, double fallback) {
    return obj.contains(key) ? number(obj.at(key), join(path, key)) : fallback;
}

bool flag_or(const json& obj, const std::string& path, const char* key, bool fallback) {
    if (!obj.contains(key)) {
        return fallback;
    }
    if (!obj.at(key).is_boolean()) {
        schema_error(join(path, key), "expected true or false");
    }
    return obj.at(key).get<bool>();
}

std::string text(const json& obj, const std::string& path, const char* key) {
    if (!obj.contains(key) || !obj.at(key).is_string()) {
        schema_error(join(path, key), "expected a string");
    }
    return obj.at(key).get<std::string>();
}

const json& array(const json& j, const std::string& path) {
    if (!j.is_array()) {
        schema_error(path, "expected an array");
    }
    return j;
}

// Scalar or nested rows -> rows x cols matrix.
Matrix matrix(const json& j, const std::string& path, int rows, int cols) {
    Matrix out(rows, cols);
    if (j.is_number()) {
        if (rows != 1 || cols != 1) {
            schema_error(path, "scalar given where a matrix is required");
        }
        out(0, 0) = j.get<double>();
        return out;
    }
    const json& r = array(j, path);
    if (static_cast<int>(r.size()) != rows) {
        schema_error(path, "expected " + std::to_string(rows) + " rows");
    }
    for (int i = 0; i < rows; ++i) {
        const std::string rp = index(path, static_cast<std::size_t>(i));
        const json& row = array(r[static_cast<std::size_t>(i)], rp);
        if (static_cast<int>(row.size()) != cols) {
            schema_error(rp, "expected " + std::to_string(cols) + " entries");
        }
        for (int c = 0; c < cols; ++c) {
            out(i, c) = number(row[static_cast<std::size_t>(c)], index(rp, static_cast<std::size_t>(c)));
        }
    }
    return out;
}

PerformanceFunction envelope(const json& j, const std::string& path) {
    require_object(j, path);
    only_keys(j, path, {"lambda0", "lambda_inf", "rate"});
    try {
        return PerformanceFunction::exponential(number(j, path, "lambda0"),
                                                number(j, path, "lambda_inf"),
                                                number(j, path, "rate"));
    } catch (const ConfigError& e) {
        schema_error(path, e.what());
    }
}

ReferenceSignal reference(const json& j, const std::string& path) {
    require_object(j, path);
    const std::string type = text(j, path, "type");
    try {
        if (type == "cosine") {
            only_keys(j, path, {"type", "amplitude", "omega", "phase", "offset"});
            return ReferenceSignal::cosine(number(j, path, "amplitude"), number(j, path, "omega"),
                                           number_or(j, path, "phase", 0.0),
                                           number_or(j, path, "offset", 0.0));
        }
        if (type == "constant") {
            only_keys(j, path, {"type", "value"});
            return ReferenceSignal::constant(number(j, path, "value"));
        }
        if (type == "sum_of_sines") {
            only_keys(j, path, {"type", "terms", "offset"});
            const std::string tp = join(path, "terms");
            if (!j.contains("terms")) {
                schema_error(tp, "missing required field");
            }
            std::vector<ReferenceSignal::Sinusoid> terms;
            const json& arr = array(j.at("terms"), tp);
            for (std::size_t k = 0; k < arr.size(); ++k) {
                const std::string ep = index(tp, k);
                require_object(arr[k], ep);
                only_keys(arr[k], ep, {"amplitude", "omega", "phase"});
                terms.push_back({number(arr[k], ep, "amplitude"), number(arr[k], ep, "omega"),
                                 number_or(arr[k], ep, "phase", 0.0)});
            }
            return ReferenceSignal::sum_of_sines(std::move(terms),
                                                 number_or(j, path, "offset", 0.0));
        }
    } catch (const ConfigError& e) {
        if (std::string(e.what()).rfind("scenario field", 0) == 0) {
            throw;
        }
        schema_error(path, e.what());
    }
    schema_error(join(path, "type"), "unknown reference type '" + type + "'");
}

ControlMode mode_from(const std::string& s, const std::string& path) {
    if (s == "corrected") {
        return ControlMode::Corrected;
    }
    if (s == "uncorrected") {
        return ControlMode::Uncorrected;
    }
    if (s == "open_loop") {
        return ControlMode::OpenLoop;
    }
    schema_error(path, "expected corrected, uncorrected or open_loop");
}

DelaySpec delays(const json& j, const std::string& path) {
    require_object(j, path);
    only_keys(j, path, {"tau_s", "tau_u"});
    const double tau_s = number_or(j, path, "tau_s", 0.0);
    try {
        if (!j.contains("tau_u") || j.at("tau_u").is_number()) {
            return DelaySpec::constant(tau_s, number_or(j, path, "tau_u", 0.0));
        }
        const std::string up = join(path, "tau_u");
        const json& u = j.at("tau_u");
        require_object(u, up);
        only_keys(u, up, {"mean", "amplitude", "omega"});
        return DelaySpec::sinusoidal(tau_s, number(u, up, "mean"), number_or(u, up, "amplitude", 0.0),
                                     number_or(u, up, "omega", 0.0));
    } catch (const ConfigError& e) {
        if (std::string(e.what()).rfind("scenario field", 0) == 0) {
            throw;
        }
        schema_error(path, e.what());
    }
}

int line_of(const std::string& text, std::size_t byte) {
    int line = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
        line += text[i] == '\n';
    }
    return line;
}

}  // namespace

void Scenario::validate() const {
    const auto p = make_plant(plant, plant_params);
    const ControllerConfig cfg(controller);
    if (cfg.m() != p->m() || cfg.n() != p->n()) {
        schema_error("controller", "dimensions do not match plant '" + plant + "'");
    }
    if (static_cast<int>(references.size()) != p->m()) {
        schema_error("reference", "one reference per output required");
    }
    if (initial_state.size() != p->physical_dim()) {
        schema_error("initial_state",
                     "expected " + std::to_string(p->physical_dim()) + " entries");
    }
    if (!(t_end > 0.0) || !std::isfinite(t_end)) {
        schema_error("simulation.t_end", "must be positive");
    }
    if (!(h > 0.0) || !std::isfinite(h)) {
        schema_error("simulation.h", "must be positive");
    }
    if (stride < 1) {
        schema_error("simulation.stride", "must be at least 1");
    }
    if (!(tolerance >= 0.0)) {
        schema_error("simulation.tolerance", "must be nonnegative");
    }
    const double lag = delays.min_positive_lag();
    if (lag > 0.0 && h > 0.5 * lag * (1.0 + 1e-12)) {
        std::ostringstream os;
        os << "h=" << h << " exceeds half the smallest delay " << lag;
        schema_error("simulation.h", os.str());
    }
    delays.validate(t_end);
    if (baseline) {
        if (baseline->k.rows() != cfg.m() || baseline->k.cols() != cfg.n() - 1) {
            schema_error("baseline.k", "must be m x (n-1)");
        }
        (void)cfg.with_gains(baseline->k, baseline->k_n);
    }
}

Scenario parse_scenario(const std::string& src, const std::string& source) {
    json root;
    try {
        root = json::parse(src);
    } catch (const json::parse_error& e) {
        std::ostringstream os;
        os << source << ": parse error at line " << line_of(src, e.byte) << " (byte " << e.byte
           << "): " << e.what();
        throw ConfigError(os.str());
    }
    require_object(root, "<root>");
    only_keys(root, "", {"name", "plant", "initial_state", "delays", "controller", "reference",
                         "simulation", "flags", "baseline", "description"});

    Scenario s;
    s.name = root.contains("name") ? text(root, "", "name") : source;

    if (!root.contains("plant")) {
        schema_error("plant", "missing required field");
    }
    const json& pj = root.at("plant");
    require_object(pj, "plant");
    only_keys(pj, "plant", {"name", "m1", "m2", "k_spring", "d_damper"});
    s.plant = text(pj, "plant", "name");
    s.plant_params.m1 = number_or(pj, "plant", "m1", s.plant_params.m1);
    s.plant_params.m2 = number_or(pj, "plant", "m2", s.plant_params.m2);
    s.plant_params.k_spring = number_or(pj, "plant", "k_spring", s.plant_params.k_spring);
    s.plant_params.d_damper = number_or(pj, "plant", "d_damper", s.plant_params.d_damper);
    std::shared_ptr<Plant> plant;
    try {
        plant = make_plant(s.plant, s.plant_params);
    } catch (const ConfigError& e) {
        schema_error("plant", e.what());
    }
    const int m = plant->m();
    const int n = plant->n();

    if (root.contains("initial_state")) {
        const json& a = array(root.at("initial_state"), "initial_state");
        for (std::size_t k = 0; k < a.size(); ++k) {
            s.initial_state.push_back(number(a[k], index("initial_state", k)));
        }
    } else {
        s.initial_state.assign(plant->physical_dim(), 0.0);
    }

    if (root.contains("delays")) {
        s.delays = delays(root.at("delays"), "delays");
    }

    if (!root.contains("controller")) {
        schema_error("controller", "missing required field");
    }
    const json& cj = root.at("controller");
    require_object(cj, "controller");
    only_keys(cj, "controller",
              {"mode", "S", "alpha", "k", "k_n", "delta", "psi", "psi_n", "sigma", "s_star"});
    if (cj.contains("mode")) {
        s.mode = mode_from(text(cj, "controller", "mode"), "controller.mode");
    }
    ControllerParams& c = s.controller;
    if (!cj.contains("S")) {
        schema_error("controller.S", "missing required field");
    }
    c.S = matrix(cj.at("S"), "controller.S", m, m);
    c.alpha = number(cj, "controller", "alpha");
    c.k = n > 1 ? matrix(cj.contains("k") ? cj.at("k") : json(), "controller.k", m, n - 1)
                : Matrix(m, 0);
    c.k_n = number(cj, "controller", "k_n");
    c.delta = number_or(cj, "controller", "delta", 0.0);
    if (n > 1) {
        if (!cj.contains("psi")) {
            schema_error("controller.psi", "missing required field");
        }
        const json& rows = array(cj.at("psi"), "controller.psi");
        if (static_cast<int>(rows.size()) != m) {
            schema_error("controller.psi", "expected " + std::to_string(m) + " rows");
        }
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const std::string rp = index("controller.psi", i);
            const json& row = array(rows[i], rp);
            if (static_cast<int>(row.size()) != n - 1) {
                schema_error(rp, "expected " + std::to_string(n - 1) + " envelopes");
            }
            std::vector<PerformanceFunction> envs;
            for (std::size_t jdx = 0; jdx < row.size(); ++jdx) {
                envs.push_back(envelope(row[jdx], index(rp, jdx)));
            }
            c.psi.push_back(std::move(envs));
        }
    } else if (cj.contains("psi")) {
        schema_error("controller.psi", "not used for relative degree 1 (use psi_n)");
    } else {
        c.psi.assign(static_cast<std::size_t>(m), {});
    }
    if (!cj.contains("psi_n")) {
        schema_error("controller.psi_n", "missing required field");
    }
    c.psi_n = envelope(cj.at("psi_n"), "controller.psi_n");
    if (cj.contains("sigma")) {
        c.sigma = static_cast<int>(number(cj, "controller", "sigma"));
    }
    if (cj.contains("s_star")) {
        c.s_star = number(cj, "controller", "s_star");
    }

    if (!root.contains("reference")) {
        schema_error("reference", "missing required field");
    }
    const json& rj = root.at("reference");
    if (rj.is_array()) {
        for (std::size_t k = 0; k < rj.size(); ++k) {
            s.references.push_back(reference(rj[k], index("reference", k)));
        }
    } else {
        s.references.push_back(reference(rj, "reference"));
    }

    if (root.contains("simulation")) {
        const json& sj = root.at("simulation");
        require_object(sj, "simulation");
        only_keys(sj, "simulation", {"t_end", "h", "stride", "tolerance"});
        s.t_end = number_or(sj, "simulation", "t_end", s.t_end);
        s.h = number_or(sj, "simulation", "h", s.h);
        const double stride = number_or(sj, "simulation", "stride", s.stride);
        if (stride != std::floor(stride) || stride < 1 || stride > 1e9) {
            schema_error("simulation.stride", "must be a positive integer");
        }
        s.stride = static_cast<int>(stride);
        s.tolerance = number_or(sj, "simulation", "tolerance", s.tolerance);
    }

    if (root.contains("flags")) {
        const json& fj = root.at("flags");
        require_object(fj, "flags");
        only_keys(fj, "flags", {"check_feasibility", "record_margins", "baseline_controller"});
        s.check_feasibility = flag_or(fj, "flags", "check_feasibility", false);
        s.record_margins = flag_or(fj, "flags", "record_margins", true);
        s.baseline_controller = flag_or(fj, "flags", "baseline_controller", false);
    }

    if (root.contains("baseline")) {
        const json& bj = root.at("baseline");
        require_object(bj, "baseline");
        only_keys(bj, "baseline", {"k", "k_n"});
        BaselineGains g;
        g.k = n > 1 ? matrix(bj.contains("k") ? bj.at("k") : json(), "baseline.k", m, n - 1)
                    : Matrix(m, 0);
        g.k_n = number(bj, "baseline", "k_n");
        s.baseline = g;
    }

    try {
        s.validate();
    } catch (const ConfigError& e) {
        if (std::string(e.what()).rfind("scenario field", 0) == 0) {
            throw;
        }
        throw ConfigError(source + ": " + e.what());
    }
    return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open scenario file " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    Scenario s = parse_scenario(buf.str(), path.string());
    if (s.name == path.string()) {
        s.name = path.stem().string();
    }
    return s;
}

}  // namespace dppc
