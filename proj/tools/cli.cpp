#include "cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <optional>
#include <ostream>
#include <sstream>

#include "cavio/analysis.hpp"
#include "cavio/error.hpp"
#include "cavio/fit.hpp"
#include "cavio/format.hpp"
#include "cavio/io.hpp"
#include "cavio/possweep.hpp"
#include "cavio/sweep.hpp"

namespace cavio::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Options {
    std::string config;
    std::string model;
    std::string out = ".";
    std::string grid;
    std::optional<double> field;
    unsigned threads = 1;
    std::string convention;
    bool gnuplot = false;
    // fit-only
    std::vector<std::string> traces;
    // regime/possweep
    std::string table;
    std::optional<double> step_mm;
};

// Config file contents resolved against the config's directory.
struct RunConfig {
    json blocks = json::object();  // command-specific block
    fs::path base;
};

void allow(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
    if (!j.is_object()) throw ValidationError(where + ": expected an object");
    for (const auto& [k, v] : j.items())
        if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; }))
            throw ValidationError("unknown key '" + k + "' in " + where);
}

std::vector<double> numbers(const json& j, std::size_t n, const std::string& where) {
    if (!j.is_array() || j.size() != n)
        throw ValidationError(where + ": expected an array of " + std::to_string(n) + " numbers");
    std::vector<double> v;
    for (const auto& x : j) {
        if (!x.is_number()) throw ValidationError(where + ": expected numbers");
        v.push_back(x.get<double>());
    }
    return v;
}

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

void require_file(const fs::path& p, const char* what) {
    if (!fs::is_regular_file(p)) throw ValidationError(std::string(what) + " not found: " + p.string());
}

std::string timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw ValidationError("cannot write " + p.string());
    os << text;
}

template <class F>
void write_with(const fs::path& p, F&& f) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw ValidationError("cannot write " + p.string());
    f(os);
}

// "lo:hi:n" -> axis spec
std::vector<double> parse_axis(const std::string& s, const char* what) {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ':')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw ValidationError(std::string("--grid: bad ") + what + " axis '" + s + "'");
        }
    }
    if (v.size() == 1) return {v[0], v[0], 1};
    if (v.size() != 3 || v[2] < 1 || v[2] != std::floor(v[2]))
        throw ValidationError(std::string("--grid: ") + what + " axis must be lo:hi:n");
    return v;
}

struct GridSpec {
    std::vector<double> f;  // lo, hi, n
    std::optional<std::vector<double>> h;
};

GridSpec parse_grid(const std::string& s) {
    GridSpec g;
    const auto comma = s.find(',');
    g.f = parse_axis(s.substr(0, comma), "frequency");
    if (comma != std::string::npos) g.h = parse_axis(s.substr(comma + 1), "field");
    return g;
}

SystemModel load_run_model(const Options& o, const RunConfig& rc, const json& top) {
    std::string path = o.model;
    if (path.empty() && top.contains("model")) path = resolve(rc.base, top["model"].get<std::string>()).string();
    if (path.empty()) throw ValidationError("no model given (use --model or the config key 'model')");
    require_file(path, "model file");
    SystemModel m = load_model(path);
    std::string conv = o.convention;
    if (conv.empty() && top.contains("convention")) conv = top["convention"].get<std::string>();
    if (!conv.empty()) {
        auto opt = m.options();
        opt.diagonal = parse_diagonal_convention(conv);
        m = m.with_options(opt);
    }
    return m;
}

void gnuplot_script(const fs::path& p, const std::string& csv, const std::string& ylabel, bool map) {
    std::ostringstream s;
    s << "set datafile separator ','\nset key autotitle columnhead\n";
    if (map) {
        s << "set view map\nset xlabel 'f (GHz)'\nset ylabel 'mu0H (T)'\nset cblabel '" << ylabel << "'\n"
          << "splot '" << csv << "' using 1:2:3 with points palette pointsize 0.5 pointtype 5\n";
    } else {
        s << "set xlabel 'f (GHz)'\nset ylabel '" << ylabel << "'\nplot '" << csv << "' using 1:2 with lines\n";
    }
    write_text(p, s.str());
}

// ------------------------------------------------------------ commands

int cmd_spectrum(const Options& o, const RunConfig& rc, const json& top, std::ostream& out) {
    const json& blk = rc.blocks;
    allow(blk, "config.spectrum", {"f_GHz", "mu0H_T"});
    const SystemModel model = load_run_model(o, rc, top);
    std::vector<double> f{3.3, 15.7, 12401};
    double h = 0.0;
    if (blk.contains("f_GHz")) f = numbers(blk["f_GHz"], 3, "config.spectrum.f_GHz");
    if (blk.contains("mu0H_T")) h = numbers(json::array({blk["mu0H_T"]}), 1, "config.spectrum.mu0H_T")[0];
    if (!o.grid.empty()) {
        const auto g = parse_grid(o.grid);
        f = g.f;
        if (g.h) h = (*g.h)[0];
    }
    if (o.field) h = *o.field;
    const Grid grid = Grid::linear(f[0], f[1], static_cast<std::size_t>(f[2]), h, h, 1);
    const SpectrumMap map = run_sweep(model, grid, {o.threads});
    const Layer mag = map.mag_db(1, 0);
    const Layer ph = map.phase(1, 0);

    const fs::path dir(o.out);
    fs::create_directories(dir);
    write_with(dir / "spectrum.csv", [&](std::ostream& os) {
        os << "f_GHz,S21_dB,phi21_rad\n";
        for (std::size_t j = 0; j < grid.nf(); ++j)
            os << format_double(grid.f_ghz[j]) << ',' << format_double(mag(0, j)) << ','
               << format_double(ph(0, j)) << '\n';
    });
    write_text(dir / "spectrum.meta.json", sweep_metadata_json(model, grid, "spectrum", timestamp()));
    if (o.gnuplot) gnuplot_script(dir / "spectrum.gp", "spectrum.csv", "|S21| (dB)", false);
    if (grid.nf() >= 3) {
        try {
            const auto dips = find_antiresonances(grid.f_ghz, mag.row(0), {grid.f_ghz.front(), grid.f_ghz.back()});
            out << "antiresonances (GHz):";
            for (double d : dips) out << ' ' << format_double(d);
            out << '\n';
        } catch (const ValidationError&) {
        }
    }
    out << "wrote " << (dir / "spectrum.csv").string() << '\n';
    return kSuccess;
}

int cmd_map(const Options& o, const RunConfig& rc, const json& top, std::ostream& out) {
    const json& blk = rc.blocks;
    allow(blk, "config.map", {"f_GHz", "mu0H_T"});
    const SystemModel model = load_run_model(o, rc, top);
    std::vector<double> f{11.0, 12.0, 401}, h{0.38, 0.42, 201};
    if (blk.contains("f_GHz")) f = numbers(blk["f_GHz"], 3, "config.map.f_GHz");
    if (blk.contains("mu0H_T")) h = numbers(blk["mu0H_T"], 3, "config.map.mu0H_T");
    if (!o.grid.empty()) {
        const auto g = parse_grid(o.grid);
        f = g.f;
        if (g.h) h = *g.h;
    }
    if (o.field) h = {*o.field, *o.field, 1};
    const Grid grid = Grid::linear(f[0], f[1], static_cast<std::size_t>(f[2]), h[0], h[1], static_cast<std::size_t>(h[2]));
    const SpectrumMap map = run_sweep(model, grid, {o.threads});

    const fs::path dir(o.out);
    fs::create_directories(dir);
    write_with(dir / "map_S.csv", [&](std::ostream& os) { write_map_csv(map, os); });
    const struct {
        const char* file;
        const char* name;
        Layer layer;
    } layers[] = {{"mag_S21_dB.csv", "S21_dB", map.mag_db(1, 0)},
                  {"mag_S12_dB.csv", "S12_dB", map.mag_db(0, 1)},
                  {"phase_S21_rad.csv", "phi21_rad", map.phase(1, 0)},
                  {"iso_dB.csv", "iso_dB", isolation(map)}};
    for (const auto& l : layers) {
        write_with(dir / l.file, [&](std::ostream& os) { write_layer_csv(grid, l.layer, l.name, os); });
        if (o.gnuplot)
            gnuplot_script(dir / (fs::path(l.file).stem().string() + ".gp"), l.file, l.name, grid.nh() > 1);
    }
    if (grid.nh() == 1) {
        // Degenerate field axis: also emit the plain trace.
        write_with(dir / "trace.csv", [&](std::ostream& os) {
            os << "f_GHz,S21_dB,S12_dB,iso_dB\n";
            for (std::size_t j = 0; j < grid.nf(); ++j)
                os << format_double(grid.f_ghz[j]) << ',' << format_double(layers[0].layer(0, j)) << ','
                   << format_double(layers[1].layer(0, j)) << ',' << format_double(layers[3].layer(0, j)) << '\n';
        });
    }
    write_text(dir / "map.meta.json", sweep_metadata_json(model, grid, "map", timestamp()));
    if (map.singular_count() > 0) out << "warning: " << map.singular_count() << " singular grid points flagged\n";
    out << "wrote " << grid.size() << " grid points to " << dir.string() << '\n';
    return kSuccess;
}

FitProblem make_fit_problem(const SystemModel& model, const Trace& trace, const json& blk) {
    std::vector<double> f, y;
    double lo = -HUGE_VAL, hi = HUGE_VAL;
    if (blk.contains("f_range_GHz")) {
        const auto r = numbers(blk["f_range_GHz"], 2, "config.fit.f_range_GHz");
        lo = r[0];
        hi = r[1];
    }
    for (std::size_t i = 0; i < trace.f_ghz.size(); ++i)
        if (trace.f_ghz[i] >= lo && trace.f_ghz[i] <= hi) {
            f.push_back(trace.f_ghz[i]);
            y.push_back(trace.values[i]);
        }
    if (f.empty()) throw ValidationError("fit: no samples inside f_range_GHz");
    double h = 0.0;
    if (blk.contains("mu0H_T")) h = numbers(json::array({blk["mu0H_T"]}), 1, "config.fit.mu0H_T")[0];
    auto params = dissipation_parameters(model);
    if (blk.value("free_frequencies", false)) {
        for (std::size_t u = 0; u < model.cavity_count(); ++u) {
            const double fc = model.cavity_modes()[u].f_ghz;
            params.push_back({"f_c[" + std::to_string(u) + "]", {{ParameterKind::Frequency, u, -1}},
                              fc - 0.05, fc + 0.05, false});
        }
    }
    return FitProblem{model, FieldPoint(h), std::move(f), std::move(y), {}, std::move(params)};
}

int cmd_fit(const Options& o, const RunConfig& rc, const json& top, std::ostream& out) {
    const json& blk = rc.blocks;
    allow(blk, "config.fit", {"trace", "traces", "f_range_GHz", "mu0H_T", "free_frequencies"});
    const SystemModel model = load_run_model(o, rc, top);
    std::vector<std::pair<std::string, fs::path>> traces;
    for (const auto& t : o.traces) traces.emplace_back(fs::path(t).stem().string(), t);
    if (traces.empty() && blk.contains("trace"))
        traces.emplace_back("trace", resolve(rc.base, blk["trace"].get<std::string>()));
    if (traces.empty() && blk.contains("traces")) {
        for (const auto& t : blk["traces"]) {
            allow(t, "config.fit.traces[]", {"label", "path"});
            traces.emplace_back(t.value("label", ""), resolve(rc.base, t.at("path").get<std::string>()));
        }
    }
    if (traces.empty()) throw ValidationError("fit: no trace given (use --trace or config.fit.trace)");
    std::vector<FitProblem> problems;
    std::vector<std::string> labels;
    for (const auto& [label, path] : traces) {
        require_file(path, "trace file");
        problems.push_back(make_fit_problem(model, read_measured_trace(path), blk));
        labels.push_back(label);
    }
    const fs::path dir(o.out);
    fs::create_directories(dir);
    if (problems.size() == 1) {
        const FitResult r = levenberg_marquardt(problems.front());
        write_text(dir / "fit_report.json", fit_report_json(r));
        write_text(dir / "fitted_model.json", model_to_json(r.model));
        const auto sim = transmission_db(r.model, problems[0].field, problems[0].f_ghz);
        write_with(dir / "fitted_trace.csv", [&](std::ostream& os) {
            write_trace_csv(Trace{problems[0].f_ghz, sim}, "S21_dB", os);
        });
        for (std::size_t k = 0; k < r.names.size(); ++k)
            out << r.names[k] << " = " << format_double(r.estimates[k]) << " +- " << format_double(r.std_errors[k]) << '\n';
        out << "converged: " << (r.converged ? "yes" : "no") << " (" << to_string(r.stop) << ", "
            << r.iterations << " iterations)\n";
        return r.converged ? kSuccess : kNumericalFailure;
    }
    BatchOptions bo;
    bo.threads = o.threads;
    const BatchResult b = batch_fit(problems, labels, bo);
    write_text(dir / "batch_report.json", batch_report_json(b));
    std::size_t failed = 0;
    for (const auto& e : b.entries) failed += e.result ? 0 : 1;
    out << "fitted " << b.entries.size() - failed << " of " << b.entries.size() << " traces\n";
    return failed == 0 ? kSuccess : kNumericalFailure;
}

ExcursionOptions excursion_options(const json& blk, const std::string& where) {
    ExcursionOptions e;
    if (blk.contains("f_window_GHz")) {
        const auto v = numbers(blk["f_window_GHz"], 2, where + ".f_window_GHz");
        e.f_window = {v[0], v[1]};
    }
    if (blk.contains("mu0H_window_T")) {
        const auto v = numbers(blk["mu0H_window_T"], 2, where + ".mu0H_window_T");
        e.h_window = {v[0], v[1]};
    }
    return e;
}

ProfileOptions profile_options(const Options& o, const json& blk, const std::string& where) {
    ProfileOptions p;
    p.threads = o.threads;
    if (blk.contains("step_mm")) p.step_mm = numbers(json::array({blk["step_mm"]}), 1, where + ".step_mm")[0];
    if (blk.contains("mu0H_T")) p.field_t = numbers(json::array({blk["mu0H_T"]}), 1, where + ".mu0H_T")[0];
    if (o.step_mm) p.step_mm = *o.step_mm;
    if (o.field) p.field_t = *o.field;
    p.regime.excursion.f_window = excursion_options(blk, where).f_window;
    return p;
}

PositionTable load_table(const Options& o, const RunConfig& rc, const json& blk) {
    fs::path p = o.table;
    if (p.empty() && blk.contains("table")) p = resolve(rc.base, blk["table"].get<std::string>());
    if (p.empty()) throw ValidationError("no position table given (use --table or config key 'table')");
    require_file(p, "position table");
    return read_position_table(p);
}

void write_profile(const fs::path& dir, const RegimeProfile& prof, std::ostream& out) {
    write_with(dir / "profile.csv", [&](std::ostream& os) { write_profile_csv(prof, os); });
    write_text(dir / "profile_report.json", profile_report_json(prof));
    for (const auto& b : prof.boundaries)
        out << "boundary at y = " << format_double(b.y_mm) << " mm (" << to_string(b.from) << " -> "
            << to_string(b.to) << ")\n";
}

int cmd_regime(const Options& o, const RunConfig& rc, const json& top, std::ostream& out) {
    const json& blk = rc.blocks;
    allow(blk, "config.regime",
          {"f_window_GHz", "mu0H_window_T", "suppression", "influence", "g_ref_MHz", "table", "step_mm", "mu0H_T"});
    const SystemModel model = load_run_model(o, rc, top);
    const fs::path dir(o.out);
    fs::create_directories(dir);

    RegimeOptions ro;
    ro.excursion = excursion_options(blk, "config.regime");
    const RegimeReport rep = classify_regime(model, ro);
    write_text(dir / "regime_report.json", regime_report_json(rep));
    out << "regime: " << to_string(rep.overall) << " (excursion " << format_double(rep.excursion_mhz)
        << " MHz, threshold " << format_double(rep.threshold_mhz) << " MHz)\n";

    SuppressionOptions so;
    so.threads = o.threads;
    so.excursion = ro.excursion;
    if (blk.contains("g_ref_MHz")) so.g_ref_mhz = numbers(json::array({blk["g_ref_MHz"]}), 1, "config.regime.g_ref_MHz")[0];
    if (blk.contains("suppression")) {
        for (const auto& s : blk["suppression"]) {
            allow(s, "config.regime.suppression[]", {"varied", "reference"});
            const auto r = suppression_ratio(model, s.at("varied").get<std::size_t>(), s.at("reference").get<std::size_t>(), so);
            write_text(dir / ("suppression_g" + std::to_string(r.varied) + "_g" + std::to_string(r.reference) + ".json"),
                       suppression_report_json(r));
            out << "g" << r.varied << "0/g" << r.reference << "0 = " << format_double(r.ratio) << '\n';
        }
    }
    if (blk.contains("influence")) {
        for (const auto& s : blk["influence"]) {
            allow(s, "config.regime.influence[]", {"a", "b", "reference"});
            const auto a = s.at("a").get<std::size_t>(), b = s.at("b").get<std::size_t>();
            const auto r = influence_ratio(model, a, b, s.at("reference").get<std::size_t>(), so);
            write_text(dir / ("influence_g" + std::to_string(a) + "_g" + std::to_string(b) + ".json"),
                       influence_report_json(r));
            out << "influence g" << b << "0 vs g" << a << "0: coupling reading " << format_double(r.coupling_reading)
                << ", excursion reading " << format_double(r.excursion_reading) << '\n';
        }
    }
    if (blk.contains("table") || !o.table.empty()) {
        const PositionTable table = load_table(o, rc, blk);
        write_profile(dir, regime_profile(table, model, profile_options(o, blk, "config.regime")), out);
    }
    return kSuccess;
}

int cmd_possweep(const Options& o, const RunConfig& rc, const json& top, std::ostream& out) {
    const json& blk = rc.blocks;
    allow(blk, "config.possweep", {"table", "step_mm", "mu0H_T", "f_window_GHz"});
    const SystemModel base = load_run_model(o, rc, top);
    const PositionTable table = load_table(o, rc, blk);
    const fs::path dir(o.out);
    fs::create_directories(dir);
    const ProfileOptions po = profile_options(o, blk, "config.possweep");
    write_profile(dir, regime_profile(table, base, po), out);
    return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multi-mode input-output simulator for two-port cavity-magnon systems", "cavio"};
    app.require_subcommand(1, 1);
    Options o;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "Run configuration (JSON)");
        sub->add_option("--model", o.model, "Model definition file (JSON)");
        sub->add_option("--out", o.out, "Output directory");
        sub->add_option("--grid", o.grid, "f_lo:f_hi:nf[,h_lo:h_hi:nh] (GHz, T)");
        sub->add_option("--field", o.field, "Static field mu0H (T)");
        sub->add_option("--threads", o.threads, "Worker threads (0 = all cores)");
        sub->add_option("--convention", o.convention, "Diagonal decay convention")
            ->check(CLI::IsMember({"paper", "total-decay"}));
        sub->add_flag("--gnuplot", o.gnuplot, "Also write gnuplot scripts");
    };
    auto* spectrum = app.add_subcommand("spectrum", "|S21| and phase trace at a fixed field");
    auto* map = app.add_subcommand("map", "Frequency x field maps with isolation layer");
    auto* fit = app.add_subcommand("fit", "Fit dissipation rates to transmission traces");
    auto* regime = app.add_subcommand("regime", "Coupling regime, suppression ratios, position profile");
    auto* possweep = app.add_subcommand("possweep", "Regime profile along the sphere displacement");
    for (auto* s : {spectrum, map, fit, regime, possweep}) common(s);
    fit->add_option("--trace", o.traces, "Trace file(s): CSV (f_GHz,S21_dB) or Touchstone .s2p");
    for (auto* s : {regime, possweep}) {
        s->add_option("--table", o.table, "Position table CSV");
        s->add_option("--step", o.step_mm, "Position step (mm)");
    }

    std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
    try {
        app.parse(std::move(rev));
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kSuccess;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help();
        return kSuccess;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kValidationFailure;
    }

    const std::string name = app.get_subcommands().front()->get_name();
    try {
        RunConfig rc;
        json top = json::object();
        if (!o.config.empty()) {
            require_file(o.config, "config file");
            std::ifstream in(o.config);
            try {
                top = json::parse(in);
            } catch (const json::parse_error& e) {
                throw ValidationError(std::string("config: malformed JSON: ") + e.what());
            }
            allow(top, "config", {"model", "out", "convention", "threads", "spectrum", "map", "fit", "regime", "possweep"});
            rc.base = fs::path(o.config).parent_path();
            for (const char* k : {"spectrum", "map", "fit", "regime", "possweep"})
                if (top.contains(k) && name != k)
                    throw ValidationError(std::string("config block '") + k + "' does not match the command '" + name + "'");
            if (top.contains(name)) rc.blocks = top[name];
            // Command-line flags take precedence over the config file.
            const auto* sub = app.get_subcommands().front();
            if (sub->get_option("--out")->count() == 0 && top.contains("out"))
                o.out = resolve(rc.base, top["out"].get<std::string>()).string();
            if (sub->get_option("--threads")->count() == 0 && top.contains("threads"))
                o.threads = top["threads"].get<unsigned>();
            if (top.contains("convention") && !top["convention"].is_string())
                throw ValidationError("config.convention: expected a string");
        }
        if (name == "spectrum") return cmd_spectrum(o, rc, top, out);
        if (name == "map") return cmd_map(o, rc, top, out);
        if (name == "fit") return cmd_fit(o, rc, top, out);
        if (name == "regime") return cmd_regime(o, rc, top, out);
        return cmd_possweep(o, rc, top, out);
    } catch (const ValidationError& e) {
        err << "validation error: " << e.what() << '\n';
        return kValidationFailure;
    } catch (const json::exception& e) {
        err << "validation error: config: " << e.what() << '\n';
        return kValidationFailure;
    } catch (const Error& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kNumericalFailure;
    } catch (const fs::filesystem_error& e) {
        err << "validation error: " << e.what() << '\n';
        return kValidationFailure;
    } catch (const std::exception& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kNumericalFailure;
    }
}

}  // namespace cavio::cli
