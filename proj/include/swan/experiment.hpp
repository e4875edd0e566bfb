#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>
#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "swan/pareto.hpp"
#include "swan/random.hpp"
#include "swan/sensing_limits.hpp"
#include "swan/tdma.hpp"
#include "swan/units.hpp"

namespace swan::experiment {

inline constexpr const char* kVersion = "0.1.0";

enum class Kind { gain_ss, gain_sa_sm, pareto, sumrate_vs_power, sumrate_vs_K };

inline const char* to_string(Kind k)
{
    switch (k)
    {
        case Kind::gain_ss: return "gain_ss";
        case Kind::gain_sa_sm: return "gain_sa_sm";
        case Kind::pareto: return "pareto";
        case Kind::sumrate_vs_power: return "sumrate_vs_power";
        case Kind::sumrate_vs_K: return "sumrate_vs_K";
    }
    return "?";
}

inline Kind parse_kind(const std::string& s)
{
    for (Kind k : {Kind::gain_ss, Kind::gain_sa_sm, Kind::pareto, Kind::sumrate_vs_power, Kind::sumrate_vs_K})
        if (s == to_string(k)) return k;
    throw Error("unknown experiment type '" + s + "'");
}

/// Reference scenario used by every experiment unless overridden.
inline ScenarioConfig default_scenario() { return ScenarioConfig{}; }

inline Position default_target() { return {10.0, -6.0, 0.0}; }

struct Config
{
    Kind kind = Kind::pareto;
    std::uint64_t seed = 1;
    std::string output;
    ScenarioConfig scenario = default_scenario();
    Position target = default_target();
    SearchConfig search;
    double eps_step = 0.1;
    int max_ao_iters = 20;
    FloorConvention floors = FloorConvention::k_scaled;

    std::vector<int> segments{15, 30};
    std::vector<Protocol> protocols{Protocol::ss, Protocol::sa, Protocol::sm};
    std::vector<double> areas{50.0, 200.0};
    bool even_pairs = false;
    std::uint64_t oracle_samples = 1000000;

    std::vector<double> gamma_sen_dbm{-20, -15, -10, -5, 0, 5, 10, 15, 20, 25, 30, 35};
    std::vector<double> target_xs;
    Position user{30.0, 0.0, 0.0};

    std::vector<double> p_max_dbm{-20, -10, 0, 10, 20, 30};
    std::vector<int> users{3};
    int draws = 10;
    double gamma_com = 1.5;
    double gamma_sen_multi_dbm = -50.0;

    void validate() const
    {
        scenario.validate();
        if (!(search.grid_step > 0.0)) throw Error("search.grid_step_m must be positive");
        if (search.max_iters < 1) throw Error("search.max_iters must be >= 1");
        if (!(search.rel_tol >= 0.0)) throw Error("search.rel_tol must be non-negative");
        if (!(eps_step > 0.0 && eps_step <= 1.0)) throw Error("search.eps_step must lie in (0, 1]");
        if (segments.empty()) throw Error("sweep.segments must not be empty");
        for (int n : segments)
        {
            if (n < 1) throw Error("sweep.segments entries must be >= 1");
            if (kind == Kind::gain_sa_sm && n % 2 == 0 && !even_pairs)
                throw Error("gain_sa_sm needs odd segment counts unless sweep.even_segments = pairs");
        }
        if (kind == Kind::gain_ss || kind == Kind::gain_sa_sm)
        {
            if (areas.empty()) throw Error("sweep.area_x_m must not be empty");
            for (double a : areas)
                if (!(a > 0.0)) throw Error("sweep.area_x_m entries must be positive");
        }
        if (kind == Kind::gain_ss && oracle_samples != 0 && oracle_samples < 10000)
            throw Error("sweep.oracle_samples must be 0 or >= 10000");
        if (kind == Kind::pareto)
        {
            if (gamma_sen_dbm.empty()) throw Error("sweep.gamma_sen_dbm must not be empty");
            if (!std::is_sorted(gamma_sen_dbm.begin(), gamma_sen_dbm.end()))
                throw Error("sweep.gamma_sen_dbm must be ascending");
        }
        if (kind == Kind::sumrate_vs_power || kind == Kind::sumrate_vs_K)
        {
            if (users.empty()) throw Error("sweep.users must not be empty");
            for (int k : users)
                if (k < 1) throw Error("sweep.users entries must be >= 1");
            if (draws < 1) throw Error("sweep.draws must be >= 1");
            if (!(gamma_com >= 0.0)) throw Error("sweep.gamma_com must be non-negative");
            if (p_max_dbm.empty()) throw Error("sweep.p_max_dbm must not be empty");
            if (!std::is_sorted(p_max_dbm.begin(), p_max_dbm.end())) throw Error("sweep.p_max_dbm must be ascending");
        }
        if (protocols.empty()) throw Error("sweep.protocols must not be empty");
    }
};

namespace detail {

inline std::string trim(std::string s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    const auto e = s.find_last_not_of(" \t\r\n");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& raw)
{
    const std::string s = trim(raw);
    try
    {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
        return v;
    }
    catch (const std::exception&)
    {
        throw Error("invalid number for " + key + ": '" + s + "'");
    }
}

inline long parse_long(const std::string& key, const std::string& raw)
{
    const double v = parse_double(key, raw);
    if (v != std::floor(v) || std::abs(v) > 9e15) throw Error("expected an integer for " + key);
    return static_cast<long>(v);
}

/// "a, b, c" or "start:step:stop" (inclusive).
inline std::vector<double> parse_list(const std::string& key, const std::string& raw)
{
    std::vector<double> out;
    std::stringstream ss(raw);
    std::string item;
    while (std::getline(ss, item, ','))
    {
        item = trim(item);
        if (item.empty()) continue;
        if (item.find(':') != std::string::npos)
        {
            std::vector<std::string> parts;
            std::stringstream ps(item);
            std::string p;
            while (std::getline(ps, p, ':')) parts.push_back(p);
            if (parts.size() != 3) throw Error("range for " + key + " must be start:step:stop");
            const double a = parse_double(key, parts[0]);
            const double st = parse_double(key, parts[1]);
            const double b = parse_double(key, parts[2]);
            if (!(st > 0.0) || b < a) throw Error("empty or invalid range for " + key);
            const auto n = static_cast<long>(std::floor((b - a) / st + 1e-9));
            for (long i = 0; i <= n; ++i) out.push_back(a + static_cast<double>(i) * st);
        }
        else
        {
            out.push_back(parse_double(key, item));
        }
    }
    return out;
}

inline std::vector<int> to_ints(const std::string& key, const std::vector<double>& v)
{
    std::vector<int> out;
    for (double d : v)
    {
        if (d != std::floor(d)) throw Error("expected integers for " + key);
        out.push_back(static_cast<int>(d));
    }
    return out;
}

}  // namespace detail

inline Config parse_config(std::istream& in)
{
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try
    {
        pt::read_ini(in, tree);
    }
    catch (const pt::ini_parser_error& e)
    {
        throw Error(std::string("config: ") + e.what());
    }

    Config c;
    std::set<std::string> sections{"experiment", "scenario", "search", "sweep"};
    for (const auto& [name, sub] : tree)
        if (!sections.count(name)) throw Error("config: unknown section [" + name + "]");

    auto get = [&](const std::string& sec, const std::string& key) -> std::optional<std::string> {
        auto s = tree.get_child_optional(sec);
        if (!s) return std::nullopt;
        auto v = s->get_optional<std::string>(key);
        if (!v) return std::nullopt;
        return detail::trim(*v);
    };

    std::map<std::string, std::set<std::string>> known{
        {"experiment", {"type", "seed", "output"}},
        {"scenario",
         {"carrier_freq_hz", "n_eff", "kappa_db_per_m", "height_m", "y_tx_m", "y_rx_m", "area_x_m", "area_y_m",
          "p_max_dbm", "noise_c_dbm", "noise_s_dbm", "reflection", "min_spacing_m", "target_x_m", "target_y_m"}},
        {"search", {"grid_step_m", "max_iters", "rel_tol", "eps_step", "max_ao_iters", "floors"}},
        {"sweep",
         {"segments", "protocols", "area_x_m", "even_segments", "oracle_samples", "gamma_sen_dbm", "target_x_m",
          "user_x_m", "user_y_m", "p_max_dbm", "users", "draws", "gamma_com", "multi_gamma_sen_dbm"}},
    };
    for (const auto& [name, sub] : tree)
        for (const auto& [key, val] : sub)
            if (!known[name].count(key)) throw Error("config: unknown key '" + key + "' in [" + name + "]");

    auto type = get("experiment", "type");
    if (!type) throw Error("config: [experiment] type is required");
    c.kind = parse_kind(*type);
    if (auto v = get("experiment", "seed"))
    {
        const long s = detail::parse_long("experiment.seed", *v);
        if (s < 0) throw Error("experiment.seed must be non-negative");
        c.seed = static_cast<std::uint64_t>(s);
    }
    if (auto v = get("experiment", "output")) c.output = *v;

    auto num = [&](const char* sec, const char* key, double& dst) {
        if (auto v = get(sec, key)) dst = detail::parse_double(std::string(sec) + "." + key, *v);
    };
    ScenarioConfig& s = c.scenario;
    num("scenario", "carrier_freq_hz", s.carrier_freq_hz);
    num("scenario", "n_eff", s.n_eff);
    num("scenario", "kappa_db_per_m", s.kappa_db_per_m);
    num("scenario", "height_m", s.height);
    num("scenario", "y_tx_m", s.y_tx);
    num("scenario", "y_rx_m", s.y_rx);
    num("scenario", "area_x_m", s.area_x);
    num("scenario", "area_y_m", s.area_y);
    num("scenario", "reflection", s.reflection);
    num("scenario", "target_x_m", c.target.x);
    num("scenario", "target_y_m", c.target.y);
    if (auto v = get("scenario", "p_max_dbm")) s.p_max = dbm_to_watt(detail::parse_double("scenario.p_max_dbm", *v));
    if (auto v = get("scenario", "noise_c_dbm"))
        s.noise_c = dbm_to_watt(detail::parse_double("scenario.noise_c_dbm", *v));
    if (auto v = get("scenario", "noise_s_dbm"))
        s.noise_s = dbm_to_watt(detail::parse_double("scenario.noise_s_dbm", *v));
    if (auto v = get("scenario", "min_spacing_m"); v && *v != "auto")
        s.min_spacing = detail::parse_double("scenario.min_spacing_m", *v);
    else
        s.min_spacing = s.wavelength() / 2.0;

    num("search", "grid_step_m", c.search.grid_step);
    num("search", "rel_tol", c.search.rel_tol);
    num("search", "eps_step", c.eps_step);
    if (auto v = get("search", "max_iters")) c.search.max_iters = static_cast<int>(detail::parse_long("search.max_iters", *v));
    if (auto v = get("search", "max_ao_iters"))
        c.max_ao_iters = static_cast<int>(detail::parse_long("search.max_ao_iters", *v));
    if (auto v = get("search", "floors"))
    {
        if (*v == "k_scaled") c.floors = FloorConvention::k_scaled;
        else if (*v == "literal") c.floors = FloorConvention::literal;
        else throw Error("search.floors must be k_scaled or literal");
    }

    if (auto v = get("sweep", "segments")) c.segments = detail::to_ints("sweep.segments", detail::parse_list("sweep.segments", *v));
    if (auto v = get("sweep", "protocols"))
    {
        c.protocols.clear();
        std::stringstream ss(*v);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!detail::trim(item).empty()) c.protocols.push_back(parse_protocol(detail::trim(item)));
    }
    if (auto v = get("sweep", "area_x_m")) c.areas = detail::parse_list("sweep.area_x_m", *v);
    if (auto v = get("sweep", "even_segments"))
    {
        if (*v == "pairs") c.even_pairs = true;
        else if (*v == "reject") c.even_pairs = false;
        else throw Error("sweep.even_segments must be reject or pairs");
    }
    if (auto v = get("sweep", "oracle_samples"))
    {
        const long n = detail::parse_long("sweep.oracle_samples", *v);
        if (n < 0) throw Error("sweep.oracle_samples must be non-negative");
        c.oracle_samples = static_cast<std::uint64_t>(n);
    }
    if (auto v = get("sweep", "gamma_sen_dbm")) c.gamma_sen_dbm = detail::parse_list("sweep.gamma_sen_dbm", *v);
    if (auto v = get("sweep", "target_x_m")) c.target_xs = detail::parse_list("sweep.target_x_m", *v);
    num("sweep", "user_x_m", c.user.x);
    num("sweep", "user_y_m", c.user.y);
    if (auto v = get("sweep", "p_max_dbm")) c.p_max_dbm = detail::parse_list("sweep.p_max_dbm", *v);
    if (auto v = get("sweep", "users")) c.users = detail::to_ints("sweep.users", detail::parse_list("sweep.users", *v));
    if (auto v = get("sweep", "draws")) c.draws = static_cast<int>(detail::parse_long("sweep.draws", *v));
    num("sweep", "gamma_com", c.gamma_com);
    num("sweep", "multi_gamma_sen_dbm", c.gamma_sen_multi_dbm);

    c.validate();
    return c;
}

inline Config load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw Error("cannot open config '" + path + "'");
    return parse_config(in);
}

/// Commented template with every key at its default.
inline std::string default_config_text()
{
    return R"(# SWAN experiment configuration. Full-line comments only.
# Units are part of the key name: _m metres, _dbm dBm, _hz hertz.
# Lists accept "a, b, c" or an inclusive range "start:step:stop".

[experiment]
# gain_ss | gain_sa_sm | pareto | sumrate_vs_power | sumrate_vs_K
type = pareto
seed = 1
output = pareto.csv

[scenario]
carrier_freq_hz = 28e9
n_eff = 1.4
kappa_db_per_m = 0.08
height_m = 3
y_tx_m = 5
y_rx_m = -5
area_x_m = 40
area_y_m = 20
p_max_dbm = 20
noise_c_dbm = -90
noise_s_dbm = -90
reflection = 1
# auto = half the free-space wavelength
min_spacing_m = auto
target_x_m = 10
target_y_m = -6

[search]
grid_step_m = 0.01
max_iters = 50
rel_tol = 1e-4
eps_step = 0.1
max_ao_iters = 20
# k_scaled | literal
floors = k_scaled

[sweep]
segments = 15, 30
protocols = ss, sa, sm
gamma_sen_dbm = -20:5:35
target_x_m = 5, 25
user_x_m = 30
user_y_m = 0
)";
}

/// RFC-4180 table.
struct Table
{
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::string to_csv() const
    {
        std::string out;
        auto cell = [&](const std::string& s) {
            if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
            std::string q = "\"";
            for (char ch : s)
            {
                if (ch == '"') q += '"';
                q += ch;
            }
            return q + "\"";
        };
        auto line = [&](const std::vector<std::string>& r) {
            for (std::size_t i = 0; i < r.size(); ++i)
            {
                if (i) out += ',';
                out += cell(r[i]);
            }
            out += "\r\n";
        };
        line(header);
        for (const auto& r : rows) line(r);
        return out;
    }
};

inline std::string fmt_num(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline std::string fmt_bool(bool b) { return b ? "true" : "false"; }

/// Position of user k in draw d; users are nested across K.
inline Position draw_user(const Config& c, int draw, int k)
{
    const CounterRng rng(c.seed, static_cast<std::uint64_t>(draw));
    const double ux = static_cast<double>(rng.at(2 * static_cast<std::uint64_t>(k)) >> 11) * 0x1.0p-53;
    const double uy = static_cast<double>(rng.at(2 * static_cast<std::uint64_t>(k) + 1) >> 11) * 0x1.0p-53;
    return {ux * c.scenario.area_x, (uy - 0.5) * c.scenario.area_y, 0.0};
}

inline std::vector<Position> draw_users(const Config& c, int draw, int k)
{
    std::vector<Position> out;
    for (int i = 0; i < k; ++i) out.push_back(draw_user(c, draw, i));
    return out;
}

/// One independent unit of work producing a block of rows.
struct Task
{
    std::function<std::vector<std::vector<std::string>>()> run;
};

inline std::vector<std::string> header_for(Kind k)
{
    switch (k)
    {
        case Kind::gain_ss:
            return {"area_x_m", "segments_tx", "segments_rx", "gain_swan", "gain_pass", "eta", "eta_asymptotic",
                    "eta_oracle", "eta_oracle_se", "oracle_rel_err"};
        case Kind::gain_sa_sm:
            return {"protocol", "area_x_m", "segments_tx", "segments_rx", "eta_exact", "eta_approx",
                    "approx_method", "approx_rel_err", "eta_asymptotic", "eta_sinh_large_n", "turning_point_tx",
                    "turning_point_rx"};
        case Kind::pareto:
            return {"protocol", "segments_tx", "segments_rx", "target_x_m", "user_x_m", "gamma_sen_dbm", "gamma_sen",
                    "feasible", "rate", "gamma_c", "gamma_s", "closed_form_x_m", "closed_form_rate_lossfree",
                    "closed_form_rate_lossy"};
        case Kind::sumrate_vs_power:
        case Kind::sumrate_vs_K:
            return {"protocol", "segments_tx", "segments_rx", "users", "draw", "p_max_dbm", "p_max_w", "gamma_com",
                    "gamma_sen", "feasible", "sum_rate", "min_slot_rate", "power_used_w"};
    }
    return {};
}

inline std::vector<std::string> multi_row(const Config& c, Protocol p, int n, int k, int draw, double p_dbm,
                                          const TdmaProblem& prob, const TdmaSolution& s)
{
    double min_rate = 0.0, used = 0.0;
    if (s.feasible)
    {
        min_rate = *std::min_element(s.rates.begin(), s.rates.end());
        for (double v : s.powers) used += v;
    }
    return {to_string(p),          std::to_string(n),      std::to_string(n),       std::to_string(k),
            std::to_string(draw),  fmt_num(p_dbm),         fmt_num(prob.p_max),     fmt_num(c.gamma_com),
            fmt_num(prob.gamma_sen), fmt_bool(s.feasible), fmt_num(s.sum_rate),     fmt_num(min_rate),
            fmt_num(used)};
}

inline TdmaSolution solve_multi(Protocol p, const Config& c, const ScenarioConfig& cfg, const TdmaProblem& prob,
                                int n, const TdmaSolution* warm)
{
    TdmaOptions opt;
    opt.search = c.search;
    opt.eps_step = c.eps_step;
    opt.max_ao_iters = c.max_ao_iters;
    const auto un = static_cast<std::size_t>(n);
    switch (p)
    {
        case Protocol::ss: return solve_ss_multi(cfg, prob, un, un, opt);
        case Protocol::sa: return solve_sa_multi(cfg, prob, un, un, opt, warm && warm->feasible ? &warm->tx : nullptr);
        case Protocol::sm: return solve_sm_multi(cfg, prob, un, un, opt, warm);
    }
    throw Error("unknown protocol");
}

/// Budgets are solved in ascending order, each warm-started from the
/// previous budget's placement.
inline std::vector<TdmaSolution> power_sweep(Protocol p, const Config& c, int n, int k, int draw)
{
    std::vector<TdmaSolution> out;
    out.reserve(c.p_max_dbm.size());
    const TdmaSolution* warm = nullptr;
    for (double dbm : c.p_max_dbm)
    {
        ScenarioConfig cfg = c.scenario;
        cfg.p_max = dbm_to_watt(dbm);
        TdmaProblem prob;
        prob.users = draw_users(c, draw, k);
        prob.target = c.target;
        prob.gamma_sen = dbm_to_watt(c.gamma_sen_multi_dbm);
        prob.gamma_com = c.gamma_com;
        prob.p_max = cfg.p_max;
        prob.floors = c.floors;
        out.push_back(solve_multi(p, c, cfg, prob, n, warm));
        warm = &out.back();
    }
    return out;
}

inline std::vector<Task> build_tasks(const Config& c)
{
    std::vector<Task> tasks;
    switch (c.kind)
    {
        case Kind::gain_ss:
            for (double area : c.areas)
                for (int n : c.segments)
                    tasks.push_back({[&c, area, n] {
                        const GainReport r = gain_ss_closed(c.scenario, area, n, n);
                        std::string eo = "", se = "", err = "";
                        if (c.oracle_samples > 0)
                        {
                            const GainReport o = gain_ss_oracle(c.scenario, area, n, n, c.oracle_samples,
                                                                c.seed + static_cast<std::uint64_t>(n));
                            eo = fmt_num(o.eta);
                            se = fmt_num(o.std_error);
                            err = fmt_num(std::abs(o.eta - r.eta) / r.eta);
                        }
                        return std::vector<std::vector<std::string>>{
                            {fmt_num(area), std::to_string(n), std::to_string(n), fmt_num(r.gain_swan),
                             fmt_num(r.gain_pass), fmt_num(r.eta), fmt_num(r.eta_asymptotic), eo, se, err}};
                    }});
            break;
        case Kind::gain_sa_sm:
            for (double area : c.areas)
                for (Protocol p : c.protocols)
                {
                    if (p == Protocol::ss) continue;
                    for (int n : c.segments)
                        tasks.push_back({[&c, area, n, p] {
                            CenteredGeometry g = centered_geometry(c.scenario, c.target, area);
                            g.even_pairs = c.even_pairs;
                            const bool sa = p == Protocol::sa;
                            const GainMethod approx = sa ? GainMethod::sinh_approx : GainMethod::atan_approx;
                            auto run = [&](GainMethod m) {
                                return sa ? gain_sa_centered(c.scenario, g, n, n, m)
                                          : gain_sm_centered(c.scenario, g, n, n, m);
                            };
                            const GainReport ex = run(GainMethod::exact_sum);
                            const GainReport ap = run(approx);
                            const std::string large = sa ? fmt_num(run(GainMethod::sinh_large_n).eta) : "";
                            const std::string tpt = sa ? fmt_num(sa_turning_point(area, g.tx_offset)) : "";
                            const std::string tpr = sa ? fmt_num(sa_turning_point(area, g.rx_offset)) : "";
                            return std::vector<std::vector<std::string>>{
                                {to_string(p), fmt_num(area), std::to_string(n), std::to_string(n), fmt_num(ex.eta),
                                 fmt_num(ap.eta), to_string(approx), fmt_num(std::abs(ap.eta - ex.eta) / ex.eta),
                                 fmt_num(ex.eta_asymptotic), large, tpt, tpr}};
                        }});
                }
            break;
        case Kind::pareto:
        {
            std::vector<double> xs = c.target_xs.empty() ? std::vector<double>{c.target.x} : c.target_xs;
            for (Protocol p : c.protocols)
                for (int n : c.segments)
                    for (double xs_i : xs)
                        tasks.push_back({[&c, p, n, xs_i] {
                            Position st = c.target;
                            st.x = xs_i;
                            const auto un = static_cast<std::size_t>(n);
                            const SwanLayout tx = SwanLayout::uniform(c.scenario, Side::tx, un);
                            const SwanLayout rx = SwanLayout::uniform(c.scenario, Side::rx, un);
                            std::vector<double> th;
                            for (double d : c.gamma_sen_dbm) th.push_back(dbm_to_watt(d));
                            const auto pts = pareto_sweep(p, c.scenario, tx, rx, c.user, st, th, c.search);
                            std::vector<std::vector<std::string>> rows;
                            for (std::size_t i = 0; i < pts.size(); ++i)
                            {
                                const ParetoPoint& q = pts[i];
                                std::string cx, cr0, cr1;
                                if (q.closed_form && q.closed_form->feasible)
                                {
                                    cx = fmt_num(q.closed_form->x);
                                    cr0 = fmt_num(q.closed_form->rate_lossfree);
                                    cr1 = fmt_num(q.closed_form->rate_lossy);
                                }
                                rows.push_back({to_string(p), std::to_string(n), std::to_string(n), fmt_num(xs_i),
                                                fmt_num(c.user.x), fmt_num(c.gamma_sen_dbm[i]), fmt_num(q.threshold),
                                                fmt_bool(q.feasible), q.feasible ? fmt_num(q.rate) : "",
                                                q.feasible ? fmt_num(q.gamma_c) : "",
                                                q.feasible ? fmt_num(q.gamma_s) : "", cx, cr0, cr1});
                            }
                            return rows;
                        }});
            break;
        }
        case Kind::sumrate_vs_power:
            for (Protocol p : c.protocols)
                for (int n : c.segments)
                    for (int d = 0; d < c.draws; ++d)
                        tasks.push_back({[&c, p, n, d] {
                            const int k = c.users.front();
                            const auto sols = power_sweep(p, c, n, k, d);
                            std::vector<std::vector<std::string>> rows;
                            for (std::size_t i = 0; i < sols.size(); ++i)
                            {
                                TdmaProblem prob;
                                prob.p_max = dbm_to_watt(c.p_max_dbm[i]);
                                prob.gamma_sen = dbm_to_watt(c.gamma_sen_multi_dbm);
                                rows.push_back(multi_row(c, p, n, k, d, c.p_max_dbm[i], prob, sols[i]));
                            }
                            return rows;
                        }});
            break;
        case Kind::sumrate_vs_K:
            for (Protocol p : c.protocols)
                for (int n : c.segments)
                    for (int k : c.users)
                        for (int d = 0; d < c.draws; ++d)
                            tasks.push_back({[&c, p, n, k, d] {
                                TdmaProblem prob;
                                prob.users = draw_users(c, d, k);
                                prob.target = c.target;
                                prob.gamma_sen = dbm_to_watt(c.gamma_sen_multi_dbm);
                                prob.gamma_com = c.gamma_com;
                                prob.p_max = c.scenario.p_max;
                                prob.floors = c.floors;
                                const TdmaSolution s = solve_multi(p, c, c.scenario, prob, n, nullptr);
                                return std::vector<std::vector<std::string>>{
                                    multi_row(c, p, n, k, d, watt_to_dbm(prob.p_max), prob, s)};
                            }});
            break;
    }
    return tasks;
}

/// Runs all tasks on `threads` workers; output order is the task order.
inline Table run(const Config& c, unsigned threads = 1)
{
    c.validate();
    std::vector<Task> tasks = build_tasks(c);
    std::vector<std::vector<std::vector<std::string>>> results(tasks.size());
    std::vector<std::string> errors(tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++)
        {
            try
            {
                results[i] = tasks[i].run();
            }
            catch (const std::exception& e)
            {
                errors[i] = e.what();
            }
        }
    };
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(tasks.size(), 1))));
    if (threads == 1)
    {
        worker();
    }
    else
    {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    for (std::size_t i = 0; i < errors.size(); ++i)
        if (!errors[i].empty()) throw Error("sweep point " + std::to_string(i) + " failed: " + errors[i]);
    Table t;
    t.header = header_for(c.kind);
    for (auto& block : results)
        for (auto& r : block) t.rows.push_back(std::move(r));
    return t;
}

inline std::string sha256_hex(const std::string& data)
{
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) throw Error("sha256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i)
    {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

inline nlohmann::json manifest(const Config& c, const std::string& config_text, const std::string& csv,
                               double wall_seconds, unsigned threads)
{
    nlohmann::json j;
    j["version"] = kVersion;
    j["experiment"] = to_string(c.kind);
    j["seed"] = c.seed;
    j["config_sha256"] = sha256_hex(config_text);
    j["output_sha256"] = sha256_hex(csv);
    j["rows"] = std::count(csv.begin(), csv.end(), '\n') - 1;
    j["threads"] = threads;
    j["wall_seconds"] = wall_seconds;
    j["floors"] = c.floors == FloorConvention::k_scaled ? "k_scaled" : "literal";
    j["grid_step_m"] = c.search.grid_step;
    return j;
}

}  // namespace swan::experiment
