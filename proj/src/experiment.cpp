#include "ttt/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "ttt/dataset.hpp"
#include "ttt/ksp.hpp"
#include "ttt/ops.hpp"
#include "ttt/phantom.hpp"
#include "ttt/random.hpp"
#include "ttt/training.hpp"

namespace ttt {

namespace {

double reference_range(const Tensor<float>& ref) {
    const double r = ops::max_abs(ref);
    return r > 0.0 ? r : 1.0;
}

}  // namespace

int worker_count() {
    if (const char* env = std::getenv("TTT_RECON_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(worker_count()), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

std::filesystem::path dataset_dir(const ExperimentConfig& cfg, DistId dist, bool test) {
    return cfg.output_dir / "data" / to_string(dist) / (test ? "test" : "train");
}

std::filesystem::path model_path(const ExperimentConfig& cfg, LossMode mode, DistId dist) {
    return cfg.output_dir / "models" / (to_string(mode) + "_" + to_string(dist) + ".ksp");
}

void generate_data(const ExperimentConfig& cfg) {
    for (DistId d : {DistId::P, DistId::Q}) {
        make_dataset(cfg.split_spec(d, false), cfg.n_train, dataset_dir(cfg, d, false), to_string(d));
        make_dataset(cfg.split_spec(d, true), cfg.n_test, dataset_dir(cfg, d, true), to_string(d));
    }
}

std::vector<KSpaceSample> make_split(const ExperimentConfig& cfg, DistId dist, bool test) {
    const auto spec = cfg.split_spec(dist, test);
    const auto n = test ? cfg.n_test : cfg.n_train;
    std::vector<KSpaceSample> out(static_cast<std::size_t>(n));
    parallel_for(out.size(), [&](std::size_t i) {
        out[i] = make_sample(spec, i);
        out[i].id = to_string(dist) + "_" + out[i].id;
    });
    return out;
}

std::vector<KSpaceSample> load_split(const ExperimentConfig& cfg, DistId dist, bool test) {
    const auto dir = dataset_dir(cfg, dist, test);
    if (std::filesystem::exists(dir / "manifest.json")) return load_dataset(dir);
    return make_split(cfg, dist, test);
}

std::vector<Measurement<float>> make_measurements(const std::vector<KSpaceSample>& samples, const Acquisition& acq,
                                                  std::uint64_t mask_seed) {
    std::vector<Measurement<float>> out;
    out.reserve(samples.size());
    for (const auto& s : samples) {
        const auto mask = mask_for_sample(s.id, s.kspace_full.dim(2), acq.acceleration, acq.center_fraction, mask_seed);
        out.push_back(measure(s, mask));
    }
    return out;
}

std::vector<EvalResult> evaluate(const ReconModel& model, const std::vector<Measurement<float>>& measurements,
                                 bool use_ttt, const TTTConfig& ttt_cfg) {
    std::vector<EvalResult> out(measurements.size());
    parallel_for(measurements.size(), [&](std::size_t i) {
        const auto& m = measurements[i];
        if (!m.reference) throw ContractError("evaluate: measurement " + m.id + " has no reference");
        EvalResult r;
        r.row.id = m.id;
        if (use_ttt) {
            TTTConfig c = ttt_cfg;
            c.seed = derive_seed(ttt_cfg.seed, hash_string(m.id));
            auto rec = reconstruct_with_ttt(model, m, c);
            r.image = rec.image;
            r.trace = std::move(rec.trace);
            r.row.ttt_iteration = r.trace.chosen_iteration;
        } else {
            r.image = reconstruct(model, adjoint_zf(m.kspace, m.mask));
        }
        r.row.ssim = ssim(r.image, *m.reference, reference_range(*m.reference));
        r.row.nl1 = nl1(r.image, *m.reference);
        out[i] = std::move(r);
    });
    return out;
}

std::string eval_csv(const std::vector<EvalRow>& rows) {
    std::string out = "id,ssim,nl1,ttt_iteration\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, ",%.8f,%.8f,%d\n", r.ssim, r.nl1, r.ttt_iteration);
        out += r.id + buf;
    }
    return out;
}

std::vector<EvalRow> parse_eval_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("id,ssim", 0) != 0) {
        throw FormatError("eval csv: expected header 'id,ssim,...'");
    }
    std::vector<EvalRow> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ls(line);
        for (std::string f; std::getline(ls, f, ',');) fields.push_back(f);
        if (fields.size() < 2) throw FormatError("eval csv line " + std::to_string(lineno) + ": too few fields");
        EvalRow r;
        try {
            r.id = fields[0];
            r.ssim = std::stod(fields[1]);
            if (fields.size() > 2) r.nl1 = std::stod(fields[2]);
            if (fields.size() > 3) r.ttt_iteration = std::stoi(fields[3]);
        } catch (const std::exception&) {
            throw FormatError("eval csv line " + std::to_string(lineno) + ": malformed number");
        }
        rows.push_back(r);
    }
    return rows;
}

std::vector<EvalRow> read_eval_csv(const std::filesystem::path& path) {
    const auto bytes = ksp::read_bytes(path);
    try {
        return parse_eval_csv(std::string(bytes.begin(), bytes.end()));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

double mean_ssim(const std::vector<EvalRow>& rows) {
    if (rows.empty()) throw DegenerateError("mean_ssim: no rows");
    double s = 0.0;
    for (const auto& r : rows) s += r.ssim;
    return s / static_cast<double>(rows.size());
}

GapReport gap_report_from_files(const std::filesystem::path& qq, const std::filesystem::path& pq,
                                const std::filesystem::path& qq_ttt, const std::filesystem::path& pq_ttt) {
    return gap_metrics(mean_ssim(read_eval_csv(qq)), mean_ssim(read_eval_csv(pq)), mean_ssim(read_eval_csv(qq_ttt)),
                       mean_ssim(read_eval_csv(pq_ttt)));
}

std::vector<std::uint8_t> encode_pgm(const Tensor<float>& image, double data_range) {
    if (image.ndim() != 2 || image.is_complex()) throw ShapeError("pgm: expected a real [H, W] image");
    if (!(data_range > 0.0)) throw ContractError("pgm: data_range must be positive");
    const std::string header = "P5\n" + std::to_string(image.dim(1)) + " " + std::to_string(image.dim(0)) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    for (float v : image.values()) {
        const double scaled = std::clamp(static_cast<double>(v) / data_range, 0.0, 1.0) * 255.0;
        out.push_back(static_cast<std::uint8_t>(std::lround(scaled)));
    }
    return out;
}

void write_pgm(const std::filesystem::path& path, const Tensor<float>& image, double data_range) {
    ksp::write_bytes(path, encode_pgm(image, data_range));
}

std::vector<MixturePoint> mixture_sweep(const ExperimentConfig& cfg, const MixtureData& data,
                                        const std::vector<double>& coefficients, const ModelHook& on_model) {
    std::vector<MixturePoint> out;
    const auto tc = cfg.train_config(DistId::P, cfg.train.mode);
    for (double m : coefficients) {
        const auto t0 = std::chrono::steady_clock::now();
        auto result = train_mixture(unet_init(cfg.model), data.train_p, data.train_q, m, tc);
        MixturePoint p;
        p.coefficient = m;
        p.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::vector<EvalRow> rows_p, rows_q;
        for (auto& r : evaluate(result.best, data.test_p, false, cfg.ttt)) rows_p.push_back(r.row);
        for (auto& r : evaluate(result.best, data.test_q, false, cfg.ttt)) rows_q.push_back(r.row);
        p.ssim_p = mean_ssim(rows_p);
        p.ssim_q = mean_ssim(rows_q);
        if (on_model) on_model(m, result.best);
        out.push_back(p);
    }
    return out;
}

std::string mixture_csv(const std::vector<MixturePoint>& points) {
    std::string out = "coefficient,ssim_P,ssim_Q\n";
    char buf[96];
    for (const auto& p : points) {
        std::snprintf(buf, sizeof buf, "%.4f,%.8f,%.8f\n", p.coefficient, p.ssim_p, p.ssim_q);
        out += buf;
    }
    return out;
}

}  // namespace ttt
