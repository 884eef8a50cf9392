#include "cavio/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "cavio/error.hpp"
#include "cavio/format.hpp"

namespace cavio {
namespace {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::ifstream open_text(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    return in;
}

void allow_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
    if (!obj.is_object()) throw ValidationError(where + ": expected an object");
    for (const auto& [k, v] : obj.items()) {
        if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; }))
            throw ValidationError("unknown key '" + k + "' in " + where);
    }
}

const json& need(const json& obj, const char* key, const std::string& where) {
    const auto it = obj.find(key);
    if (it == obj.end()) throw ValidationError("missing key '" + std::string(key) + "' in " + where);
    return *it;
}

double number(const json& v, const std::string& where) {
    if (!v.is_number()) throw ValidationError(where + ": expected a number");
    return v.get<double>();
}

std::array<double, 2> pair(const json& v, const std::string& where) {
    if (!v.is_array() || v.size() != 2) throw ValidationError(where + ": expected a two-element array");
    return {number(v[0], where), number(v[1], where)};
}

json model_json(const SystemModel& m) {
    json cav = json::array();
    for (const auto& c : m.cavity_modes())
        cav.push_back({{"f_GHz", c.f_ghz},
                       {"gamma_int_MHz", c.gamma_int_mhz},
                       {"gamma_ext_MHz", {c.gamma_ext_mhz[0], c.gamma_ext_mhz[1]}},
                       {"phi_ext_rad", {c.phi_ext_rad[0], c.phi_ext_rad[1]}}});
    json mags = json::array();
    for (const auto& mg : m.magnons()) {
        json cpl = json::array();
        for (const auto& c : mg.couplings) cpl.push_back({{"g_MHz", c.g_mhz}, {"theta_rad", c.theta_rad}});
        json j = {{"gyro_GHz_per_T", mg.gyro_ghz_per_t}, {"alpha", mg.alpha}, {"couplings", cpl}};
        if (mg.k_m_mhz) j["k_m_MHz"] = *mg.k_m_mhz;
        mags.push_back(j);
    }
    return {{"cavity_modes", cav},
            {"magnons", mags},
            {"xi", m.xi()},
            {"conventions",
             {{"diagonal", std::string(to_string(m.options().diagonal))},
              {"coupling_scale", std::string(to_string(m.options().coupling_scale))},
              {"symmetric_cavity", m.options().symmetric_cavity}}}};
}

json complex_json(std::complex<double> z) { return {z.real(), z.imag()}; }

json nan_safe(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
    }
    return out;
}

bool parse_number(const std::string& s, double& v) {
    if (s.empty()) return false;
    const char* first = s.data();
    if (*first == '+') ++first;
    const auto [p, ec] = std::from_chars(first, s.data() + s.size(), v);
    return ec == std::errc() && p == s.data() + s.size();
}

bool skip_line(const std::string& line) {
    const auto b = line.find_first_not_of(" \t\r");
    return b == std::string::npos || line[b] == '#';
}

}  // namespace

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

// ------------------------------------------------------------- models

SystemModel parse_model_json(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("model: malformed JSON: ") + e.what());
    }
    allow_keys(j, "model", {"cavity_modes", "magnons", "xi", "conventions", "description"});
    const json& cav = need(j, "cavity_modes", "model");
    if (!cav.is_array()) throw ValidationError("model.cavity_modes: expected an array");
    std::vector<CavityMode> modes;
    for (std::size_t u = 0; u < cav.size(); ++u) {
        const std::string w = "model.cavity_modes[" + std::to_string(u) + "]";
        allow_keys(cav[u], w, {"f_GHz", "gamma_int_MHz", "gamma_ext_MHz", "phi_ext_rad"});
        CavityMode m;
        m.f_ghz = number(need(cav[u], "f_GHz", w), w + ".f_GHz");
        m.gamma_int_mhz = number(need(cav[u], "gamma_int_MHz", w), w + ".gamma_int_MHz");
        m.gamma_ext_mhz = pair(need(cav[u], "gamma_ext_MHz", w), w + ".gamma_ext_MHz");
        m.phi_ext_rad = cav[u].contains("phi_ext_rad") ? pair(cav[u]["phi_ext_rad"], w + ".phi_ext_rad")
                                                       : std::array<double, 2>{0.0, 0.0};
        modes.push_back(m);
    }
    std::vector<MagnonMode> mags;
    if (j.contains("magnons")) {
        const json& ms = j["magnons"];
        if (!ms.is_array()) throw ValidationError("model.magnons: expected an array");
        for (std::size_t v = 0; v < ms.size(); ++v) {
            const std::string w = "model.magnons[" + std::to_string(v) + "]";
            allow_keys(ms[v], w, {"gyro_GHz_per_T", "alpha", "k_m_MHz", "couplings"});
            MagnonMode m;
            if (ms[v].contains("gyro_GHz_per_T")) m.gyro_ghz_per_t = number(ms[v]["gyro_GHz_per_T"], w + ".gyro_GHz_per_T");
            if (ms[v].contains("alpha")) m.alpha = number(ms[v]["alpha"], w + ".alpha");
            if (ms[v].contains("k_m_MHz") && !ms[v]["k_m_MHz"].is_null())
                m.k_m_mhz = number(ms[v]["k_m_MHz"], w + ".k_m_MHz");
            const json& cs = need(ms[v], "couplings", w);
            if (!cs.is_array()) throw ValidationError(w + ".couplings: expected an array");
            for (std::size_t u = 0; u < cs.size(); ++u) {
                const std::string wc = w + ".couplings[" + std::to_string(u) + "]";
                allow_keys(cs[u], wc, {"g_MHz", "theta_rad"});
                m.couplings.push_back({number(need(cs[u], "g_MHz", wc), wc + ".g_MHz"),
                                       cs[u].contains("theta_rad") ? number(cs[u]["theta_rad"], wc + ".theta_rad") : 0.0});
            }
            mags.push_back(std::move(m));
        }
    }
    ModelOptions opt;
    if (j.contains("xi")) opt.xi = number(j["xi"], "model.xi");
    if (j.contains("conventions")) {
        const json& c = j["conventions"];
        allow_keys(c, "model.conventions", {"diagonal", "coupling_scale", "symmetric_cavity"});
        if (c.contains("diagonal")) {
            if (!c["diagonal"].is_string()) throw ValidationError("model.conventions.diagonal: expected a string");
            opt.diagonal = parse_diagonal_convention(c["diagonal"].get<std::string>());
        }
        if (c.contains("coupling_scale")) {
            if (!c["coupling_scale"].is_string())
                throw ValidationError("model.conventions.coupling_scale: expected a string");
            opt.coupling_scale = parse_coupling_scale(c["coupling_scale"].get<std::string>());
        }
        if (c.contains("symmetric_cavity")) {
            if (!c["symmetric_cavity"].is_boolean())
                throw ValidationError("model.conventions.symmetric_cavity: expected a boolean");
            opt.symmetric_cavity = c["symmetric_cavity"].get<bool>();
        }
    }
    return SystemModel(std::move(modes), std::move(mags), opt);
}

SystemModel load_model(const std::filesystem::path& path) {
    try {
        return parse_model_json(read_file(path));
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

std::string model_to_json(const SystemModel& model) { return model_json(model).dump(2) + "\n"; }

std::uint64_t model_hash(const SystemModel& model) {
    const std::string s = model_json(model).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    return s;
}

// ------------------------------------------------------------- traces

Trace parse_trace_csv(std::istream& is) {
    Trace t;
    std::string line;
    std::size_t lineno = 0;
    bool header_allowed = true;
    while (std::getline(is, line)) {
        ++lineno;
        if (skip_line(line)) continue;
        const auto cells = split_csv(line);
        double f = 0.0, v = 0.0;
        const bool ok = cells.size() >= 2 && parse_number(cells[0], f) && parse_number(cells[1], v);
        if (!ok) {
            if (header_allowed) {
                header_allowed = false;
                continue;
            }
            throw ValidationError("trace CSV line " + std::to_string(lineno) + ": expected f_GHz,S21_dB");
        }
        header_allowed = false;
        if (!t.f_ghz.empty() && !(f > t.f_ghz.back()))
            throw ValidationError("trace CSV line " + std::to_string(lineno) + ": frequencies must increase");
        t.f_ghz.push_back(f);
        t.values.push_back(v);
    }
    if (t.f_ghz.empty()) throw ValidationError("trace CSV: no samples");
    return t;
}

Trace read_trace_csv(const std::filesystem::path& path) {
    auto in = open_text(path);
    try {
        return parse_trace_csv(in);
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

void write_trace_csv(const Trace& t, const char* name, std::ostream& os) {
    os << "f_GHz," << name << '\n';
    for (std::size_t i = 0; i < t.f_ghz.size(); ++i)
        os << format_double(t.f_ghz[i]) << ',' << format_double(t.values[i]) << '\n';
}

TouchstoneData parse_touchstone(std::istream& is) {
    TouchstoneData d;
    double unit = 1.0;  // GHz
    enum class Fmt { MA, DB, RI } fmt = Fmt::MA;
    bool seen_option = false;
    std::vector<double> nums;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto bang = line.find('!'); bang != std::string::npos) line.erase(bang);
        std::istringstream ss(line);
        std::string tok;
        if (!(ss >> tok)) continue;
        if (tok[0] == '[') throw ValidationError("touchstone: version-2 keywords are not supported");
        if (tok[0] == '#') {
            if (seen_option) continue;  // only the first option line counts
            seen_option = true;
            std::vector<std::string> opts;
            if (tok.size() > 1) opts.push_back(tok.substr(1));
            while (ss >> tok) opts.push_back(tok);
            for (std::size_t k = 0; k < opts.size(); ++k) {
                std::string o = opts[k];
                std::transform(o.begin(), o.end(), o.begin(), [](unsigned char c) { return std::toupper(c); });
                if (o == "HZ") unit = 1e-9;
                else if (o == "KHZ") unit = 1e-6;
                else if (o == "MHZ") unit = 1e-3;
                else if (o == "GHZ") unit = 1.0;
                else if (o == "MA") fmt = Fmt::MA;
                else if (o == "DB") fmt = Fmt::DB;
                else if (o == "RI") fmt = Fmt::RI;
                else if (o == "S") continue;
                else if (o == "R" && k + 1 < opts.size()) {
                    if (!parse_number(opts[++k], d.reference_ohm))
                        throw ValidationError("touchstone: bad reference impedance");
                } else
                    throw ValidationError("touchstone: unsupported option '" + opts[k] + "'");
            }
            continue;
        }
        do {
            double v = 0.0;
            if (!parse_number(tok, v))
                throw ValidationError("touchstone line " + std::to_string(lineno) + ": bad number '" + tok + "'");
            nums.push_back(v);
        } while (ss >> tok);
    }
    if (nums.empty() || nums.size() % 9 != 0)
        throw ValidationError("touchstone: expected 9 numbers per frequency for a two-port file");
    auto make = [&](double a, double b) -> Complex {
        switch (fmt) {
            case Fmt::RI: return {a, b};
            case Fmt::MA: return std::polar(a, b * M_PI / 180.0);
            case Fmt::DB: return std::polar(std::pow(10.0, a / 20.0), b * M_PI / 180.0);
        }
        return {};
    };
    for (std::size_t k = 0; k < nums.size(); k += 9) {
        const double f = nums[k] * unit;
        if (!d.f_ghz.empty() && !(f > d.f_ghz.back()))
            throw ValidationError("touchstone: frequencies must increase");
        d.f_ghz.push_back(f);
        SMatrix s;
        s[0][0] = make(nums[k + 1], nums[k + 2]);
        s[1][0] = make(nums[k + 3], nums[k + 4]);  // two-port order: S11 S21 S12 S22
        s[0][1] = make(nums[k + 5], nums[k + 6]);
        s[1][1] = make(nums[k + 7], nums[k + 8]);
        d.s.push_back(s);
    }
    return d;
}

TouchstoneData read_touchstone(const std::filesystem::path& path) {
    auto in = open_text(path);
    try {
        return parse_touchstone(in);
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

Trace touchstone_trace_db(const TouchstoneData& d, int out, int in) {
    if ((out != 0 && out != 1) || (in != 0 && in != 1)) throw ValidationError("port index must be 0 or 1");
    Trace t{d.f_ghz, {}};
    for (const auto& s : d.s) t.values.push_back(20.0 * std::log10(std::abs(s[out][in])));
    return t;
}

Trace read_measured_trace(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".s2p") return touchstone_trace_db(read_touchstone(path));
    return read_trace_csv(path);
}

// ----------------------------------------------------- position table

PositionTable parse_position_table(std::istream& is) {
    std::map<double, std::map<long, PositionMode>> rows;
    std::vector<double> order;
    std::string line;
    std::size_t lineno = 0;
    bool header_allowed = true;
    while (std::getline(is, line)) {
        ++lineno;
        if (skip_line(line)) continue;
        const auto c = split_csv(line);
        double v[7];
        bool ok = c.size() == 7;
        for (std::size_t k = 0; ok && k < 7; ++k) ok = parse_number(c[k], v[k]);
        if (!ok) {
            if (header_allowed) {
                header_allowed = false;
                continue;
            }
            throw ValidationError("position table line " + std::to_string(lineno) +
                                  ": expected y_mm,mode_index,f_GHz,g_MHz,phi0_rad,phi1_rad,theta_rad");
        }
        header_allowed = false;
        const long mode = std::lround(v[1]);
        if (mode < 0 || static_cast<double>(mode) != v[1])
            throw ValidationError("position table line " + std::to_string(lineno) + ": bad mode index");
        if (!rows.count(v[0])) order.push_back(v[0]);
        if (!rows[v[0]].emplace(mode, PositionMode{v[2], v[3], v[4], v[5], v[6]}).second)
            throw ValidationError("position table line " + std::to_string(lineno) + ": duplicate mode");
    }
    if (rows.empty()) throw ValidationError("position table: no rows");
    std::vector<PositionRow> out;
    for (double y : order) {
        PositionRow r{y, {}};
        long expect = 0;
        for (const auto& [k, m] : rows[y]) {
            if (k != expect++) throw ValidationError("position table: mode indices must be 0..N-1 at every y");
            r.modes.push_back(m);
        }
        out.push_back(std::move(r));
    }
    return PositionTable(std::move(out));
}

PositionTable read_position_table(const std::filesystem::path& path) {
    auto in = open_text(path);
    try {
        return parse_position_table(in);
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

void write_position_table(const PositionTable& t, std::ostream& os) {
    os << "y_mm,mode_index,f_GHz,g_MHz,phi0_rad,phi1_rad,theta_rad\n";
    for (const auto& r : t.rows())
        for (std::size_t u = 0; u < r.modes.size(); ++u) {
            const auto& m = r.modes[u];
            os << format_double(r.y_mm) << ',' << u << ',' << format_double(m.f_ghz) << ','
               << format_double(m.g_mhz) << ',' << format_double(m.phi0_rad) << ','
               << format_double(m.phi1_rad) << ',' << format_double(m.theta_rad) << '\n';
        }
}

// ------------------------------------------------------------ reports

std::string sweep_metadata_json(const SystemModel& model, const Grid& grid, std::string_view command,
                                std::string_view timestamp) {
    json j = {{"command", std::string(command)},
              {"model_hash", hex64(model_hash(model))},
              {"grid",
               {{"f_GHz", {{"min", grid.f_ghz.front()}, {"max", grid.f_ghz.back()}, {"points", grid.nf()}}},
                {"mu0H_T", {{"min", grid.h_tesla.front()}, {"max", grid.h_tesla.back()}, {"points", grid.nh()}}}}},
              {"conventions",
               {{"diagonal", std::string(to_string(model.options().diagonal))},
                {"coupling_scale", std::string(to_string(model.options().coupling_scale))},
                {"xi", model.xi()}}},
              {"model", model_json(model)},
              {"generated_at", std::string(timestamp)}};
    return j.dump(2) + "\n";
}

std::string fit_report_json(const FitResult& f) {
    json est = json::object(), se = json::object();
    for (std::size_t k = 0; k < f.names.size(); ++k) {
        est[f.names[k]] = f.estimates[k];
        se[f.names[k]] = f.std_errors[k];
    }
    json cov = json::array();
    for (std::size_t a = 0; a < f.names.size(); ++a) {
        json row = json::array();
        for (std::size_t b = 0; b < f.names.size(); ++b) row.push_back(f.cov(a, b));
        cov.push_back(row);
    }
    json j = {{"parameters", f.names}, {"estimates", est},          {"std_errors", se},
              {"covariance", cov},     {"residual_norm", f.residual_norm}, {"iterations", f.iterations},
              {"converged", f.converged}, {"stop", to_string(f.stop)}, {"residual_history", f.history},
              {"model", model_json(f.model)}};
    return j.dump(2) + "\n";
}

std::string batch_report_json(const BatchResult& b) {
    json entries = json::array();
    for (std::size_t i = 0; i < b.entries.size(); ++i) {
        const auto& e = b.entries[i];
        json j = {{"label", e.label}, {"ok", e.result.has_value()}};
        if (e.result) {
            j["fit"] = json::parse(fit_report_json(*e.result));
        } else {
            j["error"] = e.error;
        }
        j["fitted_residual"] = nan_safe(b.fitted_residual[i]);
        j["mean_model_residual"] = nan_safe(b.mean_model_residual[i]);
        entries.push_back(j);
    }
    json trends = json::array();
    for (const auto& t : b.trends) {
        json vals = json::array();
        for (double v : t.values) vals.push_back(nan_safe(v));
        trends.push_back({{"name", t.name},
                          {"values", vals},
                          {"mean", t.mean},
                          {"relative_spread", t.relative_spread},
                          {"trend", to_string(t.trend)}});
    }
    return json({{"entries", entries}, {"trends", trends}}).dump(2) + "\n";
}

std::string regime_report_json(const RegimeReport& r) {
    json tags = json::array();
    for (auto t : r.tags) tags.push_back(std::string(to_string(t)));
    json jumps = json::array();
    for (const auto& jmp : r.mode_jumps)
        jumps.push_back({{"f_GHz", jmp.f_ghz}, {"direction", std::string(to_string(jmp.direction))},
                         {"magnitude_rad", jmp.magnitude}});
    json j = {{"f_ar_GHz", r.f_ar_ghz},
              {"excursion_MHz", r.excursion_mhz},
              {"signed_pull_MHz", r.signed_pull_mhz},
              {"threshold_MHz", r.threshold_mhz},
              {"overall", std::string(to_string(r.overall))},
              {"per_mode_tags", tags},
              {"mode_jumps", jumps},
              {"crossing_gap_MHz", r.crossing_gap_mhz},
              {"crossing_width_MHz", r.crossing_width_mhz},
              {"g2_MHz2", complex_json(r.g2_mhz2)}};
    if (r.ar_jump) j["ar_jump"] = {{"f_GHz", r.ar_jump->f_ghz}, {"direction", std::string(to_string(r.ar_jump->direction))}};
    return j.dump(2) + "\n";
}

static json suppression_json(const SuppressionResult& s) {
    json minima = json::array();
    for (const auto& m : s.minima) minima.push_back({{"ratio", m.ratio}, {"excursion_MHz", m.excursion_mhz}});
    return {{"varied_mode", s.varied}, {"reference_mode", s.reference}, {"g_ref_MHz", s.g_ref_mhz},
            {"ratio", s.ratio},        {"residual", s.residual_excursion_mhz}, {"local_minima", minima}};
}

std::string suppression_report_json(const SuppressionResult& s) { return suppression_json(s).dump(2) + "\n"; }

std::string influence_report_json(const InfluenceRatio& r) {
    return json({{"coupling_reading", r.coupling_reading},
                 {"excursion_reading", r.excursion_reading},
                 {"a_vs_reference", suppression_json(r.a_vs_reference)},
                 {"b_vs_reference", suppression_json(r.b_vs_reference)}})
               .dump(2) +
           "\n";
}

std::string coupling_report_json(const EffectiveCoupling& c) {
    return json({{"g_ar_MHz", c.g_mhz},
                 {"sigma_MHz", c.sigma_mhz},
                 {"half_min_separation_MHz", c.half_min_separation_mhz},
                 {"f_ar_GHz", c.f_ar_ghz},
                 {"slope_GHz_per_T", c.slope_ghz_per_t},
                 {"h0_T", c.h0_tesla},
                 {"rows_used", c.rows_used},
                 {"split", c.split}})
               .dump(2) +
           "\n";
}

std::string profile_report_json(const RegimeProfile& p) {
    auto transitions = [](const std::vector<RegimeTransition>& v) {
        json a = json::array();
        for (const auto& t : v)
            a.push_back({{"y_mm", t.y_mm}, {"from", std::string(to_string(t.from))}, {"to", std::string(to_string(t.to))}});
        return a;
    };
    json flags = json::array();
    for (const auto& f : p.theta_flags)
        flags.push_back({{"mode", f.mode}, {"y_lo_mm", f.y_lo}, {"y_hi_mm", f.y_hi}, {"delta_theta_rad", f.delta_rad}});
    std::size_t failed = 0;
    for (const auto& e : p.errors) failed += e.empty() ? 0 : 1;
    return json({{"boundaries", transitions(p.boundaries)},
                 {"label_changes", transitions(p.label_changes)},
                 {"theta_flags", flags},
                 {"threshold_MHz", p.threshold_mhz},
                 {"positions", p.y_mm.size()},
                 {"failed_positions", failed}})
               .dump(2) +
           "\n";
}

void write_profile_csv(const RegimeProfile& p, std::ostream& os) {
    os << "y_mm,label,signed_pull_MHz";
    for (std::size_t u = 0; u < p.g_mhz.size(); ++u) os << ",g" << u << "_MHz";
    os << '\n';
    for (std::size_t i = 0; i < p.y_mm.size(); ++i) {
        os << format_double(p.y_mm[i]) << ',' << (p.labels[i] ? to_string(*p.labels[i]) : "failed") << ','
           << format_double(p.signed_pull_mhz[i]);
        for (const auto& g : p.g_mhz) os << ',' << format_double(g[i]);
        os << '\n';
    }
}

}  // namespace cavio
