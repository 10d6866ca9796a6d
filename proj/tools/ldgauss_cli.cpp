// Experiment harness: dataset generation, list decoding, mixture learning
// and record evaluation. Subcommands write one deterministic JSON record
// per run (plus a flat CSV row); wall time goes to stderr so re-running a
// record is byte-identical.
//
// Exit codes: 0 success, 2 precondition/config, 3 resource cap,
// 4 learner failure, 5 I/O, 1 internal error.

#include "ldgauss/ldgauss.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

using json = nlohmann::ordered_json;
using namespace ldgauss;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitConfig = 2;
constexpr int kExitResource = 3;
constexpr int kExitLearnerFail = 4;
constexpr int kExitIo = 5;

std::uint64_t default_seed(const std::optional<std::uint64_t>& flag_seed,
                           const std::optional<std::uint64_t>& config_seed) {
    if (flag_seed) return *flag_seed;
    if (config_seed) return *config_seed;
    if (const char* env = std::getenv("LDGAUSS_SEED")) return std::strtoull(env, nullptr, 10);
    return 0;
}

std::uint64_t fnv1a_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path);
    std::uint64_t h = 0xCBF29CE484222325ull;
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001B3ull;
        }
        if (!in) break;
    }
    return h;
}

// Mean fields accept either a full vector or a scalar c meaning c * e_1.
Vector parse_mean(const json& j, int n) {
    Vector mu = Vector::Zero(n);
    if (j.is_number()) {
        mu[0] = j.get<double>();
    } else if (j.is_array()) {
        if (static_cast<int>(j.size()) != n) throw precondition_error("mean vector has wrong length");
        for (int i = 0; i < n; ++i) mu[i] = j[static_cast<std::size_t>(i)].get<double>();
    } else {
        throw precondition_error("mean must be a number or an array");
    }
    return mu;
}

json vector_to_json(const Vector& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

GmmModel parse_model(const json& comps, int n) {
    GmmModel model;
    for (const auto& c : comps) {
        GmmComponent gc;
        gc.weight = c.at("weight").get<double>();
        gc.mean = parse_mean(c.at("mean"), n);
        gc.sigma = c.value("sigma", 1.0);
        model.components.push_back(std::move(gc));
    }
    model.validate();
    return model;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open " + path + " for writing");
    out << text;
    if (!out) throw io_error("write failed for " + path);
}

void append_csv(const std::string& path, const std::string& header, const std::string& row) {
    const bool exists = static_cast<bool>(std::ifstream(path));
    std::ofstream out(path, std::ios::app);
    if (!out) throw io_error("cannot open " + path + " for writing");
    if (!exists) out << header << '\n';
    out << row << '\n';
}

std::optional<json> try_read_meta(const std::string& data_path) {
    std::string meta_path = data_path;
    const auto pos = meta_path.rfind(".data");
    if (pos != std::string::npos && pos == meta_path.size() - 5) meta_path.resize(pos);
    meta_path += ".meta.json";
    std::ifstream in(meta_path);
    if (!in) return std::nullopt;
    json j;
    in >> j;
    return j;
}

// ---- gen -----------------------------------------------------------------

int run_gen(const std::string& config_path) {
    std::ifstream in(config_path);
    if (!in) throw io_error("cannot open config " + config_path);
    json cfg;
    in >> cfg;
    if (cfg.value("schema_version", 1) != 1) throw precondition_error("unsupported schema_version");
    const int n = cfg.at("n").get<int>();
    const auto m = cfg.at("m").get<std::int64_t>();
    const std::string kind = cfg.at("kind").get<std::string>();
    const std::string out_prefix = cfg.at("out").get<std::string>();
    std::optional<std::uint64_t> cfg_seed;
    if (cfg.contains("seed")) cfg_seed = cfg["seed"].get<std::uint64_t>();
    const std::uint64_t seed = default_seed(std::nullopt, cfg_seed);

    json meta;
    meta["schema_version"] = 1;
    meta["kind"] = kind;
    meta["n"] = n;
    meta["m"] = m;
    meta["seed"] = seed;

    if (kind == "gaussian") {
        const Vector mu = parse_mean(cfg.value("mean", json(0.0)), n);
        const double sigma = cfg.value("sigma", 1.0);
        const PointSet pts = sample_gaussian(mu, sigma, m, seed);
        write_dataset(out_prefix + ".data", pts);
        meta["truth"] = {{"mean", vector_to_json(mu)}, {"sigma", sigma}};
    } else if (kind == "gmm") {
        const GmmModel model = parse_model(cfg.at("components"), n);
        const auto sample = sample_gmm(model, m, seed);
        write_dataset(out_prefix + ".data", sample.points);
        json comps = json::array();
        for (const auto& c : model.components)
            comps.push_back({{"weight", c.weight}, {"mean", vector_to_json(c.mean)}, {"sigma", c.sigma}});
        meta["truth"] = {{"components", comps}};
    } else if (kind == "corrupted") {
        const Vector mu = parse_mean(cfg.value("mean", json(0.0)), n);
        const double sigma = cfg.value("sigma", 1.0);
        const double alpha = cfg.at("alpha").get<double>();
        const json& sj = cfg.at("strategy");
        const std::string skind = sj.at("kind").get<std::string>();
        CorruptionStrategy strategy = UniformBox{1.0};
        if (skind == "far_cluster") {
            strategy = FarCluster{parse_mean(sj.at("offset"), n), sj.value("spread", 1.0)};
        } else if (skind == "uniform_box") {
            strategy = UniformBox{sj.at("radius").get<double>()};
        } else if (skind == "line_placement") {
            strategy = LinePlacement{parse_mean(sj.at("direction"), n), sj.value("spacing", 1.0),
                                     sj.value("clusters", 3)};
        } else if (skind == "gmm") {
            strategy = MixtureOfGaussians{parse_model(sj.at("components"), n)};
        } else {
            throw precondition_error("unknown corruption strategy: " + skind);
        }
        const PointSet clean = sample_gaussian(mu, sigma, m, seed);
        const auto corrupted = corrupt(clean, alpha, strategy, seed + 1);
        write_dataset(out_prefix + ".data", corrupted.points);
        write_mask(out_prefix + ".mask", corrupted.clean_mask);
        meta["alpha"] = alpha;
        meta["strategy"] = sj;
        meta["truth"] = {{"mean", vector_to_json(mu)}, {"sigma", sigma}};
        meta["total_points"] = corrupted.points.size();
    } else {
        throw precondition_error("unknown kind: " + kind);
    }
    meta["config"] = cfg;
    write_text(out_prefix + ".meta.json", meta.dump(2) + "\n");
    std::cout << "seed " << seed << "\n";
    return kExitOk;
}

// ---- list-decode -----------------------------------------------------------

int run_list_decode(const std::string& data_path, double alpha, int d, double tau,
                    const std::string& out_path, std::optional<std::uint64_t> seed_flag,
                    const std::string& csv_path, double C) {
    const PointSet T = read_dataset(data_path);
    const std::uint64_t seed = default_seed(seed_flag, std::nullopt);

    DecodeParams dp;
    dp.C = C;
    dp.rng_seed = seed;

    const auto t0 = std::chrono::steady_clock::now();
    const DecodeResult res = list_decode_gaussian(T, alpha, d, tau, dp);
    const auto wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - t0)
                             .count();
    std::cerr << "list-decode wall time: " << wall_ms << " ms\n";

    json rec;
    rec["schema_version"] = 1;
    rec["command"] = "list-decode";
    rec["config"] = {{"data", data_path}, {"alpha", alpha},        {"d", d},
                     {"tau", tau},        {"seed", seed},          {"C", dp.C},
                     {"max_subroutine_calls", dp.max_subroutine_calls}};
    rec["dataset"] = {{"n", T.dim()}, {"m", T.size()}, {"fnv1a", fnv1a_file(data_path)}};
    json hyp = json::array();
    for (const auto& h : res.hypotheses.means) hyp.push_back(vector_to_json(h));
    rec["hypotheses"] = hyp;
    rec["provenance"] = res.hypotheses.provenance;
    rec["trace"] = {{"subroutine_calls", res.trace.subroutine_calls},
                    {"vectors", res.trace.vectors},
                    {"dropped_small", res.trace.dropped_small},
                    {"max_worklist", res.trace.max_worklist},
                    {"raw_hypotheses", res.trace.raw_hypotheses},
                    {"basic_calls", res.trace.filter.basic_calls},
                    {"degree2_calls", res.trace.filter.degree2_calls},
                    {"multilinear_calls", res.trace.filter.multilinear_calls},
                    {"harmonic_calls", res.trace.filter.harmonic_calls},
                    {"main_calls", res.trace.filter.main_calls},
                    {"split_one", res.trace.filter.split_one},
                    {"split_two", res.trace.filter.split_two},
                    {"no_outcomes", res.trace.filter.no_outcomes}};

    // List-size bound from the reduction step.
    const auto list_cap = static_cast<std::int64_t>(std::ceil(1.5 / alpha));
    if (res.hypotheses.size() > list_cap)
        throw internal_inconsistency("list-decode: output list exceeds the reduction bound");

    double best_error = -1.0, raw_mean_error = -1.0;
    std::string truth_source = "none";
    if (const auto meta = try_read_meta(data_path)) {
        if (meta->contains("truth") && (*meta)["truth"].contains("mean")) {
            const Vector mu = parse_mean((*meta)["truth"]["mean"], T.dim());
            best_error = res.hypotheses.size() > 0 ? oracle::best_error(res.hypotheses, mu) : -1.0;
            Vector raw = Vector::Zero(T.dim());
            for (std::int64_t i = 0; i < T.size(); ++i) raw += T.point(i);
            raw /= static_cast<double>(T.size());
            raw_mean_error = (raw - mu).norm();
            truth_source = "meta";
        }
    }
    rec["metrics"] = {{"list_length", res.hypotheses.size()},
                      {"best_error", best_error},
                      {"raw_mean_error", raw_mean_error},
                      {"truth_source", truth_source}};
    rec["status"] = "ok";
    write_text(out_path, rec.dump(2) + "\n");
    if (!csv_path.empty()) {
        std::ostringstream row;
        row << "list-decode," << data_path << ',' << T.dim() << ',' << T.size() << ',' << alpha << ','
            << d << ',' << tau << ',' << seed << ',' << res.hypotheses.size() << ',' << best_error
            << ',' << raw_mean_error << ',' << res.trace.subroutine_calls << ','
            << res.trace.max_worklist << ",ok";
        append_csv(csv_path,
                   "command,data,n,m,alpha,d,tau,seed,list_len,best_error,raw_mean_error,"
                   "subroutine_calls,max_worklist,status",
                   row.str());
    }
    return kExitOk;
}

// ---- learn-gmm ---------------------------------------------------------------

int run_learn_gmm(const std::string& data_path, int k, int d, double alpha, double eps,
                  const std::string& mode, double tau, const std::string& out_path,
                  std::optional<std::uint64_t> seed_flag, const std::string& csv_path, double C,
                  int threads) {
    const PointSet data = read_dataset(data_path);
    const std::uint64_t seed = default_seed(seed_flag, std::nullopt);
    const auto meta = try_read_meta(data_path);

    json rec;
    rec["schema_version"] = 1;
    rec["command"] = "learn-gmm";
    rec["config"] = {{"data", data_path}, {"k", k},     {"d", d},
                     {"alpha", alpha},    {"eps", eps}, {"mode", mode},
                     {"tau", tau},        {"seed", seed}, {"C", C},
                     {"threads", threads}};
    rec["dataset"] = {{"n", data.dim()}, {"m", data.size()}, {"fnv1a", fnv1a_file(data_path)}};
    json warnings = json::array();

    if (mode == "identity" && meta && (*meta)["truth"].contains("components")) {
        for (const auto& c : (*meta)["truth"]["components"])
            if (std::abs(c.value("sigma", 1.0) - 1.0) > 1e-12) {
                warnings.push_back(
                    "identity mode on data with sigma != 1; estimates assume unit covariance");
                std::cerr << "warning: identity mode on sigma != 1 data\n";
                break;
            }
    }

    GmmLearnParams params;
    params.C = C;
    params.rng_seed = seed;
    params.threads = threads;
    FixedDataSource source(data);
    if (mode == "identity") {
        params.m_decode = data.size() / 2;
        params.m_assoc = data.size() - params.m_decode;
    } else {
        params.m_decode = (data.size() * 45) / 100;
        params.m_assoc = (data.size() * 35) / 100;
    }

    const auto t0 = std::chrono::steady_clock::now();
    GmmLearnResult res;
    if (mode == "identity") {
        res = learn_identity_gmm(source, k, d, alpha, eps, tau, params);
    } else if (mode == "spherical") {
        res = learn_spherical_gmm(source, k, d, alpha, eps, tau, params);
    } else {
        throw precondition_error("mode must be identity or spherical");
    }
    const auto wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - t0)
                             .count();
    std::cerr << "learn-gmm wall time: " << wall_ms << " ms\n";

    for (const auto& w : res.warnings) warnings.push_back(w);
    rec["warnings"] = warnings;
    json comps = json::array();
    for (const auto& c : res.components)
        comps.push_back({{"weight", c.weight}, {"mean", vector_to_json(c.mean)}, {"sigma", c.sigma}});
    rec["components"] = comps;

    json metrics;
    metrics["k_found"] = res.components.size();
    if (meta && res.status == GmmLearnResult::Status::Ok && (*meta)["truth"].contains("components")) {
        const GmmModel truth = parse_model((*meta)["truth"]["components"], data.dim());
        if (truth.k() == static_cast<int>(res.components.size())) {
            const auto match = match_components(res.components, truth);
            metrics["weight_err"] = match.weight_err;
            metrics["mean_err"] = match.mean_err;
            metrics["sigma_err"] = match.sigma_err;
        } else {
            metrics["note"] = "component count differs from truth; no matching computed";
        }
    }
    rec["metrics"] = metrics;
    rec["status"] = res.status == GmmLearnResult::Status::Ok ? "ok" : "failure";
    if (res.status != GmmLearnResult::Status::Ok) rec["failure_message"] = res.message;
    write_text(out_path, rec.dump(2) + "\n");
    if (!csv_path.empty()) {
        std::ostringstream row;
        row << "learn-gmm," << data_path << ',' << data.dim() << ',' << data.size() << ',' << alpha
            << ',' << d << ',' << tau << ',' << seed << ',' << res.components.size() << ",,,"
            << res.decode_trace.subroutine_calls << ',' << res.decode_trace.max_worklist << ','
            << (res.status == GmmLearnResult::Status::Ok ? "ok" : "failure");
        append_csv(csv_path,
                   "command,data,n,m,alpha,d,tau,seed,list_len,best_error,raw_mean_error,"
                   "subroutine_calls,max_worklist,status",
                   row.str());
    }
    return res.status == GmmLearnResult::Status::Ok ? kExitOk : kExitLearnerFail;
}

// ---- eval -----------------------------------------------------------------

int run_eval(const std::string& record_path, const std::string& out_path) {
    std::ifstream in(record_path);
    if (!in) throw io_error("cannot open record " + record_path);
    json rec;
    in >> rec;
    const std::string command = rec.at("command").get<std::string>();
    const std::string data_path = rec.at("config").at("data").get<std::string>();
    const auto meta = try_read_meta(data_path);
    if (!meta) throw io_error("eval: no meta file next to " + data_path);
    const int n = rec.at("dataset").at("n").get<int>();

    json out;
    out["schema_version"] = 1;
    out["record"] = record_path;
    if (command == "list-decode") {
        const Vector mu = parse_mean((*meta)["truth"]["mean"], n);
        double best = -1.0;
        for (const auto& h : rec.at("hypotheses")) {
            Vector v(n);
            for (int i = 0; i < n; ++i) v[i] = h[static_cast<std::size_t>(i)].get<double>();
            const double e = (v - mu).norm();
            if (best < 0.0 || e < best) best = e;
        }
        out["best_error"] = best;
        out["list_length"] = rec.at("hypotheses").size();
    } else if (command == "learn-gmm") {
        const GmmModel truth = parse_model((*meta)["truth"]["components"], n);
        std::vector<EstimatedComponent> est;
        for (const auto& c : rec.at("components")) {
            EstimatedComponent e;
            e.weight = c.at("weight").get<double>();
            e.mean = parse_mean(c.at("mean"), n);
            e.sigma = c.value("sigma", 1.0);
            est.push_back(std::move(e));
        }
        if (truth.k() != static_cast<int>(est.size()))
            throw precondition_error("eval: component count differs from truth");
        const auto match = match_components(est, truth);
        out["weight_err"] = match.weight_err;
        out["mean_err"] = match.mean_err;
        out["sigma_err"] = match.sigma_err;
    } else {
        throw precondition_error("eval: unknown record command " + command);
    }
    write_text(out_path, out.dump(2) + "\n");
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"list-decodable Gaussian mean estimation and spherical mixture learning"};
    app.require_subcommand(1);

    std::string config_path;
    auto* gen = app.add_subcommand("gen", "generate a dataset from a JSON config");
    gen->add_option("--config", config_path, "config file")->required();

    std::string data_path, out_path, csv_path;
    double alpha = 0.1, tau = 0.01, eps = 0.0, C = 10.0;
    int d = 1, k = 1, threads = 1;
    std::optional<std::uint64_t> seed_flag;
    auto add_seed = [&](CLI::App* cmd) {
        cmd->add_option_function<std::uint64_t>(
            "--seed", [&](const std::uint64_t& s) { seed_flag = s; },
            "seed override (else LDGAUSS_SEED, else 0)");
    };

    auto* ld = app.add_subcommand("list-decode", "run the list decoder on a dataset");
    ld->add_option("--data", data_path, "dataset file")->required();
    ld->add_option("--alpha", alpha, "clean fraction promise")->required();
    ld->add_option("--d", d, "filter degree")->required();
    ld->add_option("--tau", tau, "failure probability");
    ld->add_option("--out", out_path, "output record path")->required();
    ld->add_option("--csv", csv_path, "append a CSV summary row here");
    ld->add_option("--C", C, "universal constant");
    add_seed(ld);

    std::string mode = "identity";
    auto* lg = app.add_subcommand("learn-gmm", "learn a spherical mixture from a dataset");
    lg->add_option("--data", data_path, "dataset file")->required();
    lg->add_option("--k", k, "number of components")->required();
    lg->add_option("--d", d, "filter degree")->required();
    lg->add_option("--alpha", alpha, "minimum component weight")->required();
    lg->add_option("--eps", eps, "corruption fraction");
    lg->add_option("--mode", mode, "identity or spherical")->required();
    lg->add_option("--tau", tau, "failure probability");
    lg->add_option("--out", out_path, "output record path")->required();
    lg->add_option("--csv", csv_path, "append a CSV summary row here");
    lg->add_option("--C", C, "universal constant");
    lg->add_option("--threads", threads, "worker threads (default 1, deterministic)");
    add_seed(lg);

    std::string record_path;
    auto* ev = app.add_subcommand("eval", "recompute metrics for a record against its meta file");
    ev->add_option("--record", record_path, "record JSON")->required();
    ev->add_option("--out", out_path, "metrics output path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return run_gen(config_path);
        if (ld->parsed()) return run_list_decode(data_path, alpha, d, tau, out_path, seed_flag, csv_path, C);
        if (lg->parsed())
            return run_learn_gmm(data_path, k, d, alpha, eps, mode, tau, out_path, seed_flag, csv_path,
                                 C, threads);
        if (ev->parsed()) return run_eval(record_path, out_path);
    } catch (const precondition_error& e) {
        std::cerr << "config/precondition error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const resource_cap_error& e) {
        std::cerr << "resource cap: " << e.what() << "\n";
        return kExitResource;
    } catch (const io_error& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitInternal;
}
