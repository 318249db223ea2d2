#include "dppc/harness.hpp"

#include "dppc/errors.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <future>
#include <limits>
#include <map>
#include <sstream>

namespace dppc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

ControllerParams baseline_params(const Scenario& s) {
    ControllerParams p = s.controller;
    if (s.baseline) {
        p.k = s.baseline->k;
        p.k_n = s.baseline->k_n;
    }
    return p;
}

ClosedLoop assemble(const Scenario& s, const ControllerParams& params, ControlMode mode) {
    std::vector<double> x0 = s.initial_state;
    auto phi = [x0](double, std::span<double> out) { std::copy(x0.begin(), x0.end(), out.begin()); };
    return ClosedLoop(make_plant(s.plant, s.plant_params), ControllerConfig(params), s.delays,
                      s.references, phi, mode);
}

RunReport simulate(const Scenario& s, const ClosedLoop& cl) {
    const auto wall0 = std::chrono::steady_clock::now();
    const int m = cl.config().m();
    const int n = cl.config().n();
    const std::size_t mn = static_cast<std::size_t>(m * n);
    const std::size_t p = cl.plant_dim();
    const double tau_s = cl.delays().tau_s();

    RunReport report;
    report.scenario = s.name;
    report.m = m;
    report.n = n;
    report.tau_s = tau_s;
    report.mode = cl.mode();
    RunSummary& sum = report.summary;
    sum.min_margin = std::numeric_limits<double>::infinity();

    if (cl.mode() != ControlMode::OpenLoop) {
        cl.check_admissibility();
    }
    if (s.check_feasibility && cl.mode() != ControlMode::OpenLoop) {
        report.feasibility =
            check_feasibility(feasibility_inputs(cl.plant(), cl.config(), cl.delays()));
    }

    HistoryBuffer history = cl.make_history();
    IntegrationOptions opts;
    opts.t_end = s.t_end;
    opts.h = s.h;
    opts.tolerance = s.tolerance;

    std::vector<double> chain(mn);
    bool outside = false;
    auto observer = [&](long k, double t, std::span<const double> y, std::span<const double> u,
                        const HistoryBuffer& hist) {
        if (k < 0) {
            return;
        }
        ++sum.grid_samples;
        cl.plant().chain(y.first(p), chain);
        const std::vector<double> xd = cl.delayed_chain(t, y, hist);
        const auto I = y.subspan(p, mn);

        ReportRow row;
        row.t = t;
        row.I.assign(I.begin(), I.end());
        row.u.assign(u.begin(), u.end());
        row.z.assign(mn, kNaN);
        if (cl.mode() != ControlMode::OpenLoop) {
            const ControllerOutput out = cl.controller_at(t, y, hist);
            for (int i = 0; i < m; ++i) {
                for (int j = 0; j < n; ++j) {
                    row.z[static_cast<std::size_t>(i * n + j)] = out.z(i, j);
                    sum.max_abs_z = std::max(sum.max_abs_z, std::abs(out.z(i, j)));
                }
            }
        }
        bool raw_out = false;
        bool raw_inside = true;
        double corr_sq = 0.0;
        for (int i = 0; i < m; ++i) {
            const auto& ref = cl.references()[static_cast<std::size_t>(i)];
            const double yi = chain[static_cast<std::size_t>(i * n)];
            const double ydi = ref.value(t);
            const double corr = xd[static_cast<std::size_t>(i * n)] - ref.value(t - tau_s) +
                                I[static_cast<std::size_t>(i * n)];
            const double psi = cl.config().envelope(i, 1)(t - tau_s);
            row.y.push_back(yi);
            row.yd.push_back(ydi);
            row.raw.push_back(yi - ydi);
            row.corrected.push_back(corr);
            row.psi1.push_back(psi);
            corr_sq += corr * corr;
            if (n > 1) {
                sum.min_margin = std::min(sum.min_margin, psi - std::abs(corr));
            }
            raw_inside = raw_inside && std::abs(yi - ydi) < cl.config().envelope(i, 1)(t);
            const double delayed_raw = xd[static_cast<std::size_t>(i * n)] - ref.value(t - tau_s);
            raw_out = raw_out || !(std::abs(delayed_raw) < psi);
        }
        if (n == 1) {
            sum.min_margin = std::min(sum.min_margin, row.psi1[0] - std::sqrt(corr_sq));
        }
        double unorm = 0.0;
        for (double v : u) {
            unorm += v * v;
        }
        sum.max_u_norm = std::max(sum.max_u_norm, std::sqrt(unorm));
        for (double v : I) {
            sum.max_abs_I = std::max(sum.max_abs_I, std::abs(v));
        }
        sum.raw_inside = sum.raw_inside && raw_inside;
        if (raw_out) {
            if (!outside) {
                sum.raw_exit_windows.push_back({t, t});
            }
            sum.raw_exit_windows.back().t_end = t;
        }
        outside = raw_out;
        if (k % s.stride == 0) {
            report.rows.push_back(std::move(row));
        }
    };

    const IntegrationResult result = integrate(cl, history, opts, observer);
    sum.status = result.status;
    sum.t_final = result.t_final;
    sum.steps = result.steps;
    sum.violation = result.violation;
    sum.escape = result.escape;
    if (result.status == IntegrationStatus::FunnelViolation) {
        sum.min_margin = std::min(sum.min_margin, 0.0);
    }
    sum.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    return report;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

}  // namespace

ClosedLoop make_closed_loop(const Scenario& s) {
    if (s.baseline_controller) {
        return assemble(s, baseline_params(s), ControlMode::Uncorrected);
    }
    return assemble(s, s.controller, s.mode);
}

RunReport run(const Scenario& s) {
    s.validate();
    if (s.baseline_controller) {
        return run_baseline(s);
    }
    return simulate(s, assemble(s, s.controller, s.mode));
}

RunReport run_baseline(const Scenario& s) {
    s.validate();
    return simulate(s, assemble(s, baseline_params(s), ControlMode::Uncorrected));
}

MarginSummary funnel_margin(const RunReport& r) {
    MarginSummary out{std::numeric_limits<double>::infinity(), 0.0, false};
    for (const ReportRow& row : r.rows) {
        double margin;
        if (r.n == 1) {
            double sq = 0.0;
            for (double c : row.corrected) {
                sq += c * c;
            }
            margin = row.psi1[0] - std::sqrt(sq);
        } else {
            margin = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < row.corrected.size(); ++i) {
                margin = std::min(margin, row.psi1[i] - std::abs(row.corrected[i]));
            }
        }
        if (margin < out.min_margin) {
            out.min_margin = margin;
            out.t_at_min = row.t;
        }
    }
    if (!r.succeeded()) {
        out.min_margin = std::min(out.min_margin, 0.0);
    }
    out.held = out.min_margin > 0.0;
    return out;
}

std::vector<std::string> csv_header(int m, int n) {
    std::vector<std::string> cols{"t"};
    for (int i = 1; i <= m; ++i) {
        const std::string s = std::to_string(i);
        for (const char* base : {"y_", "yd_", "err_", "cerr_"}) {
            cols.push_back(base + s);
        }
        cols.push_back("psi_" + s + "_1");
    }
    for (const char* base : {"z_", "I_"}) {
        for (int i = 1; i <= m; ++i) {
            for (int j = 1; j <= n; ++j) {
                cols.push_back(base + std::to_string(i) + "_" + std::to_string(j));
            }
        }
    }
    for (int i = 1; i <= m; ++i) {
        cols.push_back("u_" + std::to_string(i));
    }
    return cols;
}

void write_csv(const RunReport& r, std::ostream& out) {
    const auto header = csv_header(r.m, r.n);
    for (std::size_t c = 0; c < header.size(); ++c) {
        out << (c ? "," : "") << header[c];
    }
    out << '\n';
    for (const ReportRow& row : r.rows) {
        out << fmt(row.t);
        for (std::size_t i = 0; i < row.y.size(); ++i) {
            out << ',' << fmt(row.y[i]) << ',' << fmt(row.yd[i]) << ',' << fmt(row.raw[i]) << ','
                << fmt(row.corrected[i]) << ',' << fmt(row.psi1[i]);
        }
        for (const auto* block : {&row.z, &row.I, &row.u}) {
            for (double v : *block) {
                out << ',' << fmt(v);
            }
        }
        out << '\n';
    }
}

void emit_csv(const RunReport& r, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    write_csv(r, out);
    if (!out) {
        throw Error("write failed for " + path.string());
    }
}

void emit_svg(const RunReport& r, const std::filesystem::path& path) {
    if (r.rows.empty()) {
        throw Error("emit_svg: report has no rows");
    }
    const double W = 800, H = 400, pad = 50;
    const double t0 = r.rows.front().t;
    const double t1 = std::max(r.rows.back().t, t0 + 1e-12);
    double top = 0.0;
    for (const ReportRow& row : r.rows) {
        top = std::max({top, row.psi1[0], std::abs(row.raw[0]), std::abs(row.corrected[0])});
    }
    top = top > 0.0 ? 1.05 * top : 1.0;
    auto X = [&](double t) { return pad + (W - 2 * pad) * (t - t0) / (t1 - t0); };
    auto Y = [&](double v) { return H / 2 - (H / 2 - pad) * v / top; };
    auto line = [&](auto value, const char* colour, const char* dash) {
        std::ostringstream os;
        os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.2\"";
        if (*dash) {
            os << " stroke-dasharray=\"" << dash << "\"";
        }
        os << " points=\"";
        for (const ReportRow& row : r.rows) {
            os << fmt(X(row.t)) << ',' << fmt(Y(value(row))) << ' ';
        }
        os << "\"/>\n";
        return os.str();
    };
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<line x1=\"" << pad << "\" y1=\"" << H / 2 << "\" x2=\"" << W - pad << "\" y2=\""
        << H / 2 << "\" stroke=\"#bbb\"/>\n";
    out << line([](const ReportRow& q) { return q.psi1[0]; }, "black", "6,3");
    out << line([](const ReportRow& q) { return -q.psi1[0]; }, "black", "6,3");
    out << line([](const ReportRow& q) { return q.raw[0]; }, "#d62728", "");
    out << line([](const ReportRow& q) { return q.corrected[0]; }, "#1f77b4", "");
    out << "<text x=\"" << pad << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"13\">"
        << r.scenario << ": raw error (red), corrected error (blue), +-psi (dashed), t in ["
        << fmt(t0) << ", " << fmt(t1) << "], |v| &lt;= " << fmt(top) << "</text>\n</svg>\n";
}

std::string summary_json(const RunReport& r) {
    const RunSummary& s = r.summary;
    nlohmann::ordered_json j;
    j["scenario"] = r.scenario;
    j["status"] = s.status == IntegrationStatus::Completed         ? "completed"
                  : s.status == IntegrationStatus::FunnelViolation ? "funnel_violation"
                                                                   : "escape";
    j["t_final"] = s.t_final;
    j["steps"] = s.steps;
    j["rows"] = r.rows.size();
    j["min_margin"] = s.min_margin;
    j["max_abs_z"] = s.max_abs_z;
    j["max_u_norm"] = s.max_u_norm;
    j["max_abs_I"] = s.max_abs_I;
    j["raw_inside"] = s.raw_inside;
    auto windows = nlohmann::ordered_json::array();
    for (const ExitWindow& w : s.raw_exit_windows) {
        windows.push_back({w.t_begin, w.t_end});
    }
    j["raw_exit_windows"] = windows;
    if (s.violation) {
        j["violation"] = {{"row", s.violation->row},
                          {"level", s.violation->level},
                          {"value", s.violation->value},
                          {"t", s.violation->time}};
    }
    if (s.escape) {
        j["escape"] = {{"t_lo", s.escape->t_lo},
                       {"t_hi", s.escape->t_hi},
                       {"estimate", s.escape->estimate()}};
    }
    if (r.feasibility) {
        j["feasibility"] = nlohmann::ordered_json::parse(to_json(*r.feasibility));
    }
    j["wall_seconds"] = s.wall_seconds;
    return j.dump(2);
}

int exit_code(const RunReport& r) {
    switch (r.summary.status) {
        case IntegrationStatus::Completed:
            return 0;
        case IntegrationStatus::FunnelViolation:
            return 2;
        case IntegrationStatus::Escape:
            return 3;
    }
    return 1;
}

std::vector<ReproductionCheck> reproduce_suite(const std::filesystem::path& dir,
                                               const std::optional<std::filesystem::path>& out) {
    const std::vector<std::string> names{"case1",
                                         "case2",
                                         "case1_delay_free",
                                         "blow_up_open_loop",
                                         "blow_up_controlled",
                                         "case1_baseline_delayed",
                                         "case1_baseline_delay_free"};
    std::map<std::string, Scenario> scenarios;
    for (const auto& name : names) {
        scenarios.emplace(name, load_scenario(dir / (name + ".json")));
    }
    Scenario nominal = scenarios.at("case1_delay_free");
    nominal.mode = ControlMode::Uncorrected;
    nominal.name = "case1_delay_free_nominal";

    std::map<std::string, std::future<RunReport>> jobs;
    for (const auto& [name, sc] : scenarios) {
        jobs.emplace(name, std::async(std::launch::async, [&sc = sc] { return run(sc); }));
    }
    jobs.emplace(nominal.name, std::async(std::launch::async, [&nominal] { return run(nominal); }));
    std::map<std::string, RunReport> rep;
    for (auto& [name, job] : jobs) {
        rep.emplace(name, job.get());
    }
    if (out) {
        std::filesystem::create_directories(*out);
        for (const auto& [name, r] : rep) {
            emit_csv(r, *out / (name + ".csv"));
        }
    }

    std::vector<ReproductionCheck> checks;
    auto add = [&checks](std::string name, bool ok, std::string detail) {
        checks.push_back({std::move(name), ok, std::move(detail)});
    };
    std::ostringstream os;

    const RunReport& c1 = rep.at("case1");
    os << "status=" << exit_code(c1) << " min_margin=" << fmt(c1.summary.min_margin)
       << " max|z|=" << fmt(c1.summary.max_abs_z);
    add("case1 corrected error inside envelope",
        c1.succeeded() && c1.summary.min_margin > 0.0 && c1.summary.max_abs_z < 0.999, os.str());

    os.str("");
    const auto& w = c1.summary.raw_exit_windows;
    const double mid = w.size() == 1 ? 0.5 * (w[0].t_begin + w[0].t_end) : kNaN;
    os << w.size() << " window(s)";
    for (const auto& e : w) {
        os << " [" << fmt(e.t_begin) << ", " << fmt(e.t_end) << "]";
    }
    add("case1 raw error leaves envelope once near t=2",
        c1.succeeded() && w.size() == 1 && mid >= 1.3 && mid <= 2.6, os.str());

    os.str("");
    const RunReport& c2 = rep.at("case2");
    const double ratio = c2.summary.max_u_norm / c1.summary.max_u_norm;
    os << "status=" << exit_code(c2) << " min_margin=" << fmt(c2.summary.min_margin)
       << " raw_inside=" << c2.summary.raw_inside << " max|u| ratio=" << fmt(ratio);
    add("case2 inside original envelope, larger effort",
        c2.succeeded() && c2.summary.min_margin > 0.0 && c2.summary.raw_inside && ratio > 5.0,
        os.str());

    os.str("");
    const RunReport& df = rep.at("case1_delay_free");
    const RunReport& nom = rep.at(nominal.name);
    double diff = df.rows.size() == nom.rows.size() ? 0.0 : kNaN;
    for (std::size_t k = 0; k < std::min(df.rows.size(), nom.rows.size()); ++k) {
        diff = std::max({diff, std::abs(df.rows[k].y[0] - nom.rows[k].y[0]),
                         std::abs(df.rows[k].u[0] - nom.rows[k].u[0])});
    }
    os << "max|I|=" << fmt(df.summary.max_abs_I) << " max diff to nominal=" << fmt(diff);
    add("delay-free run needs no correction",
        df.succeeded() && nom.succeeded() && df.summary.max_abs_I < 1e-9 && diff < 1e-8,
        os.str());

    os.str("");
    const RunReport& bo = rep.at("blow_up_open_loop");
    const double t_esc = bo.summary.escape ? bo.summary.escape->estimate() : kNaN;
    os << "escape at " << fmt(t_esc);
    add("open-loop blow-up escape time",
        bo.summary.status == IntegrationStatus::Escape && std::abs(t_esc - 0.5) <= 1e-3, os.str());

    os.str("");
    const RunReport& bc = rep.at("blow_up_controlled");
    os << "status=" << exit_code(bc) << " t_final=" << fmt(bc.summary.t_final);
    add("controlled blow-up plant stays bounded", bc.succeeded(), os.str());

    os.str("");
    const RunReport& bd = rep.at("case1_baseline_delayed");
    const double t_fail = bd.summary.t_final;
    os << "status=" << exit_code(bd) << " t_fail=" << fmt(t_fail);
    add("baseline fails under measurement delay",
        !bd.succeeded() && t_fail >= 1.5 && t_fail <= 3.5, os.str());

    os.str("");
    const RunReport& bf = rep.at("case1_baseline_delay_free");
    os << "status=" << exit_code(bf);
    add("baseline succeeds without delay", bf.succeeded(), os.str());
    return checks;
}

}  // namespace dppc
