#include "sadvi/config.hpp"

#include <charconv>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "sadvi/evaluation.hpp"

namespace sadvi {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

int parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const int out = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const unsigned long long out = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected an unsigned integer, got '" + v + "'");
    }
}

double parse_real(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double out = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config key '" + key + "': expected true/false, got '" + v + "'");
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text) {
    RunConfig cfg;
    const std::map<std::string, std::function<void(const std::string&, const std::string&)>> setters = {
        {"case.id", [&](const std::string& k, const std::string& v) { cfg.case_id = parse_int(k, v); }},
        {"case.n", [&](const std::string& k, const std::string& v) { cfg.case_n = parse_int(k, v); }},
        {"case5.as_variance",
         [&](const std::string& k, const std::string& v) { cfg.case5_as_variance = parse_bool(k, v); }},
        {"spline.H", [&](const std::string& k, const std::string& v) { cfg.spline_h = parse_int(k, v); }},
        {"spline.degree",
         [&](const std::string& k, const std::string& v) { cfg.spline_degree = parse_int(k, v); }},
        {"latent.J", [&](const std::string& k, const std::string& v) { cfg.latent_j = parse_int(k, v); }},
        {"train.epochs",
         [&](const std::string& k, const std::string& v) { cfg.train_epochs = parse_int(k, v); }},
        {"train.batch",
         [&](const std::string& k, const std::string& v) { cfg.train_batch = parse_int(k, v); }},
        {"train.replicates",
         [&](const std::string& k, const std::string& v) { cfg.train_replicates = parse_int(k, v); }},
        {"train.jobs",
         [&](const std::string& k, const std::string& v) { cfg.train_jobs = parse_int(k, v); }},
        {"seed.base", [&](const std::string& k, const std::string& v) { cfg.seed_base = parse_u64(k, v); }},
        {"anneal.kind",
         [&](const std::string& k, const std::string& v) {
             if (v == "exponential")
                 cfg.anneal_kind = AnnealKind::exponential;
             else if (v == "linear")
                 cfg.anneal_kind = AnnealKind::linear;
             else
                 throw ConfigError("config key '" + k + "': expected exponential or linear, got '" + v + "'");
         }},
        {"anneal.lambda0",
         [&](const std::string& k, const std::string& v) { cfg.anneal_lambda0 = parse_real(k, v); }},
        {"anneal.lambda1",
         [&](const std::string& k, const std::string& v) { cfg.anneal_lambda1 = parse_real(k, v); }},
        {"anneal.rate",
         [&](const std::string& k, const std::string& v) { cfg.anneal_rate = parse_real(k, v); }},
        {"obj.T", [&](const std::string& k, const std::string& v) { cfg.obj_t = parse_int(k, v); }},
        {"obj.lambda",
         [&](const std::string& k, const std::string& v) { cfg.obj_lambda = parse_real(k, v); }},
        {"obj.kappa",
         [&](const std::string& k, const std::string& v) { cfg.obj_kappa = parse_real(k, v); }},
        {"baseline.kind",
         [&](const std::string& k, const std::string& v) {
             if (v != "gaussian" && v != "truncated-gaussian")
                 throw ConfigError("config key '" + k + "': expected gaussian or truncated-gaussian");
             cfg.baseline_kind = v;
         }},
        {"opt.lr", [&](const std::string& k, const std::string& v) { cfg.opt_lr = parse_real(k, v); }},
        {"opt.decay",
         [&](const std::string& k, const std::string& v) { cfg.opt_decay = parse_real(k, v); }},
        {"net.hidden",
         [&](const std::string& k, const std::string& v) { cfg.net_hidden = parse_int(k, v); }},
        {"net.seed", [&](const std::string& k, const std::string& v) { cfg.net_seed = parse_u64(k, v); }},
        {"mh.burn_in",
         [&](const std::string& k, const std::string& v) { cfg.mh_burn_in = parse_int(k, v); }},
        {"mh.thin", [&](const std::string& k, const std::string& v) { cfg.mh_thin = parse_int(k, v); }},
        {"eval.grid_n",
         [&](const std::string& k, const std::string& v) { cfg.eval_grid_n = parse_int(k, v); }},
    };

    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config line " + std::to_string(line_no) + ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!section.empty() && key.find('.') == std::string::npos) key = section + "." + key;
        const auto it = setters.find(key);
        if (it == setters.end())
            throw ConfigError("unknown config key '" + key + "' (line " + std::to_string(line_no) + ")");
        it->second(key, value);
    }
    return cfg;
}

RunConfig RunConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

std::string RunConfig::serialize() const {
    std::string out;
    auto put = [&](const std::string& key, const std::string& value) {
        out += key + " = " + value + "\n";
    };
    put("case.id", std::to_string(case_id));
    put("case.n", std::to_string(case_n));
    put("case5.as_variance", case5_as_variance ? "true" : "false");
    put("spline.H", std::to_string(spline_h));
    put("spline.degree", std::to_string(spline_degree));
    put("latent.J", std::to_string(latent_j));
    put("train.epochs", std::to_string(train_epochs));
    put("train.batch", std::to_string(train_batch));
    put("train.replicates", std::to_string(train_replicates));
    put("train.jobs", std::to_string(train_jobs));
    put("seed.base", std::to_string(seed_base));
    put("anneal.kind", anneal_kind == AnnealKind::exponential ? "exponential" : "linear");
    put("anneal.lambda0", format_double(anneal_lambda0));
    put("anneal.lambda1", format_double(anneal_lambda1));
    put("anneal.rate", format_double(anneal_rate));
    put("obj.T", std::to_string(obj_t));
    put("obj.lambda", format_double(obj_lambda));
    put("obj.kappa", format_double(obj_kappa));
    put("baseline.kind", baseline_kind);
    put("opt.lr", format_double(opt_lr));
    put("opt.decay", format_double(opt_decay));
    put("net.hidden", std::to_string(net_hidden));
    put("net.seed", std::to_string(net_seed));
    put("mh.burn_in", std::to_string(mh_burn_in));
    put("mh.thin", std::to_string(mh_thin));
    put("eval.grid_n", std::to_string(eval_grid_n));
    return out;
}

RunConfig RunConfig::resolved() const {
    RunConfig r = *this;
    if (r.case_id < 1 || r.case_id > 5) throw ConfigError("case.id must be in 1..5");
    if (r.spline_h == 0) r.spline_h = (r.case_id == 5) ? 9 : 6;
    if (r.spline_h < 0) throw ConfigError("spline.H must be nonnegative");
    if (r.spline_degree < 0) throw ConfigError("spline.degree must be nonnegative");
    if (r.case_n < 1) throw ConfigError("case.n must be positive");
    if (r.latent_j != 1) throw ConfigError("latent.J must be 1 for the conjugate benchmark cases");
    if (r.train_epochs < 0) throw ConfigError("train.epochs must be nonnegative");
    if (r.train_batch < 1) throw ConfigError("train.batch must be positive");
    if (r.train_replicates < 1) throw ConfigError("train.replicates must be positive");
    if (r.train_jobs < 0) throw ConfigError("train.jobs must be nonnegative");
    if (r.obj_t < 1) throw ConfigError("obj.T must be at least 1");
    if (r.obj_lambda < 0.0) throw ConfigError("obj.lambda must be nonnegative");
    if (r.obj_kappa < 0.0) throw ConfigError("obj.kappa must be nonnegative");
    if (!(r.opt_lr > 0.0)) throw ConfigError("opt.lr must be positive");
    if (!(r.opt_decay > 0.0 && r.opt_decay <= 1.0)) throw ConfigError("opt.decay must be in (0, 1]");
    if (r.net_hidden < 1) throw ConfigError("net.hidden must be positive");
    if (r.mh_burn_in < 0) throw ConfigError("mh.burn_in must be nonnegative");
    if (r.mh_thin < 1) throw ConfigError("mh.thin must be at least 1");
    if (r.eval_grid_n < 256) throw ConfigError("eval.grid_n must be at least 256");
    if (!(r.anneal_lambda1 > 0.0) || !(r.anneal_lambda0 >= r.anneal_lambda1))
        throw ConfigError("annealing requires lambda0 >= lambda1 > 0");
    if (!(r.anneal_rate > 0.0)) throw ConfigError("anneal.rate must be positive");
    return r;
}

AnnealingSchedule RunConfig::annealing() const {
    return AnnealingSchedule(anneal_kind, anneal_lambda0, anneal_lambda1, anneal_rate);
}

std::string RunConfig::content_hash() const {
    const std::string s = serialize();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
    return buf;
}

}  // namespace sadvi
