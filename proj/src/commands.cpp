// SPDX-License-Identifier: Apache-2.0
#include "binoise/commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "binoise/checkpoint.hpp"
#include "binoise/guidance.hpp"
#include "binoise/image_io.hpp"
#include "binoise/rng.hpp"
#include "binoise/run_config.hpp"
#include "binoise/tiny_net.hpp"
#include "binoise/training.hpp"

namespace binoise {

namespace fs = std::filesystem;

unsigned configured_threads() {
    const char* env = std::getenv("BINOISE_THREADS");
    if (env == nullptr || *env == '\0') return 0;
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 0) throw UsageError("BINOISE_THREADS must be a non-negative integer");
    return static_cast<unsigned>(v);
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::jthread> workers;
    const unsigned count = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    for (unsigned w = 0; w < count; ++w) {
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    workers.clear();
    if (failure) std::rethrow_exception(failure);
}

namespace {

std::string fixed(double v, int decimals) {
    std::ostringstream out;
    out.imbue(std::locale::classic());
    out << std::fixed << std::setprecision(decimals) << v;
    return out.str();
}

std::string hex64(std::uint64_t v) {
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << v;
    return out.str();
}

std::string read_file(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream buf;
    buf << f.rdbuf();
    return buf.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("failed writing " + path.string());
}

void require_flag(const std::string& value, const std::string& flag) {
    if (value.empty()) throw UsageError("missing required option --" + flag);
}

void prepare_output_dir(const fs::path& dir, bool force) {
    if (fs::exists(dir)) {
        if (!fs::is_directory(dir)) throw std::runtime_error(dir.string() + " exists and is not a directory");
        if (!fs::is_empty(dir) && !force) {
            throw std::runtime_error("output directory " + dir.string() + " is not empty (use --force to overwrite)");
        }
    }
    fs::create_directories(dir);
}

void write_run_config(const fs::path& dir, const RunConfig& cfg) {
    write_file(dir / "run_config.json", cfg.effective().dump(2) + "\n");
}

// Timestamps and timings live only here, outside the canonical artifacts.
class SidecarLog {
public:
    explicit SidecarLog(fs::path path) : path_(std::move(path)), start_(std::chrono::steady_clock::now()) {
        line("started " + timestamp());
    }

    void line(const std::string& text) { lines_ << text << '\n'; }

    void finish() {
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        line("finished " + timestamp() + " elapsed_s " + fixed(secs, 3));
        write_file(path_, lines_.str());
    }

private:
    static std::string timestamp() {
        const std::time_t now = std::time(nullptr);
        std::tm tm{};
        gmtime_r(&now, &tm);
        char buf[32];
        std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
        return buf;
    }

    fs::path path_;
    std::chrono::steady_clock::time_point start_;
    std::ostringstream lines_;
};

DegradationOp degradation_for_task(const std::string& task) {
    DegradationOp op;
    if (task == "colorize") {
        op.kind = DegradationKind::grayscale;
    } else if (task == "superres") {
        op.kind = DegradationKind::downsample;
    } else if (task == "derain") {
        op.kind = DegradationKind::rain_streaks;
    } else {
        throw UsageError("unknown task '" + task + "' (expected colorize, superres or derain)");
    }
    return op;
}

nlohmann::json to_json(const DegradationOp& op) {
    nlohmann::json j = {{"kind", to_string(op.kind)}, {"seed", op.seed}};
    if (op.kind == DegradationKind::downsample) j["factor"] = op.factor;
    if (op.kind == DegradationKind::rain_streaks) {
        j["streak_count"] = op.streak_count;
        j["streak_length"] = op.streak_length;
        j["streak_angle_deg"] = op.streak_angle_deg;
        j["streak_intensity"] = op.streak_intensity;
    }
    return j;
}

std::vector<std::size_t> parse_widths(const std::string& text) {
    std::vector<std::size_t> widths;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            const long v = std::stol(item, &used);
            if (used != item.size() || v <= 0) throw std::invalid_argument(item);
            widths.push_back(static_cast<std::size_t>(v));
        } catch (const std::exception&) {
            throw UsageError("hidden widths must be a comma-separated list of positive integers, got '" + text + "'");
        }
    }
    if (widths.empty()) throw UsageError("hidden widths list is empty");
    return widths;
}

// ---------------------------------------------------------------- gen-data

int cmd_gen_data(const std::vector<std::string>& args, std::ostream& out) {
    std::string task = "colorize";
    long count = 2000;
    long test_count = 200;
    std::uint64_t seed = 7;
    long height = 16;
    long width = 16;
    int factor = 4;
    int streak_count = 6;
    int streak_length = 6;
    double streak_angle = 70.0;
    double streak_intensity = 0.6;
    std::string out_dir;
    bool force = false;

    RunConfig cfg("gen-data", "Generate a procedural paired restoration dataset");
    cfg.option("task", task, "colorize | superres | derain");
    cfg.option("count", count, "number of training pairs");
    cfg.option("test-count", test_count, "number of held-out test pairs");
    cfg.option("seed", seed, "dataset seed");
    cfg.option("height", height, "image height");
    cfg.option("width", width, "image width");
    cfg.option("factor", factor, "downsample factor (superres)");
    cfg.option("streak-count", streak_count, "rain streaks per image (derain)");
    cfg.option("streak-length", streak_length, "rain streak length in pixels");
    cfg.option("streak-angle", streak_angle, "rain streak angle in degrees");
    cfg.option("streak-intensity", streak_intensity, "rain streak brightness");
    cfg.option("out", out_dir, "output dataset directory");
    cfg.flag("force", force, "allow writing into a non-empty directory");
    if (!cfg.parse(args, out)) return kExitOk;

    require_flag(out_dir, "out");
    if (count <= 0) throw UsageError("--count must be positive");
    if (test_count < 0) throw UsageError("--test-count must be non-negative");
    if (height <= 0 || width <= 0) throw UsageError("image size must be positive");

    DegradationOp op = degradation_for_task(task);
    op.factor = factor;
    op.streak_count = streak_count;
    op.streak_length = streak_length;
    op.streak_angle_deg = streak_angle;
    op.streak_intensity = streak_intensity;
    try {
        op.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    if (op.kind == DegradationKind::downsample && (height % factor != 0 || width % factor != 0)) {
        throw UsageError("image size must be divisible by --factor");
    }

    ToyDatasetSpec spec;
    spec.height = static_cast<std::size_t>(height);
    spec.width = static_cast<std::size_t>(width);
    spec.train_count = static_cast<std::size_t>(count);
    spec.test_count = static_cast<std::size_t>(test_count);
    spec.seed = seed;
    const PairedDataset ds = gen_dataset(spec, op);

    const fs::path dir(out_dir);
    prepare_output_dir(dir, force);
    SidecarLog log(dir / "run.log");
    fs::create_directories(dir / "clean");
    fs::create_directories(dir / "degraded");

    nlohmann::json pairs = nlohmann::json::array();
    auto emit = [&](const PairedSample& s, const char* split) {
        const std::string clean = "clean/" + s.id + ".ppm";
        const std::string degraded = "degraded/" + s.id + ".ppm";
        write_image(dir / clean, s.y0);
        write_image(dir / degraded, s.x0);
        pairs.push_back({{"id", s.id}, {"split", split}, {"clean", clean}, {"degraded", degraded}});
    };
    for (const PairedSample& s : ds.train) emit(s, "train");
    for (const PairedSample& s : ds.test) emit(s, "test");

    const nlohmann::json manifest = {
        {"format", "binoise-dataset"},
        {"version", 1},
        {"task", task},
        {"seed", seed},
        {"image", {{"channels", spec.channels}, {"height", spec.height}, {"width", spec.width}}},
        {"value_range", {-1.0, 1.0}},
        {"degradation", to_json(op)},
        {"splits", {{"train", spec.train_count}, {"test", spec.test_count}}},
        {"pairs", pairs}};
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
    write_run_config(dir, cfg);
    log.finish();
    out << "wrote " << ds.train.size() << " train and " << ds.test.size() << " test pairs to " << dir.string() << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------- shared loading

struct LoadedModel {
    Checkpoint ckpt;
    std::unique_ptr<TinyNet> net;
    std::unique_ptr<NullTokenView> null_view;  // set when a conditional net serves as a prior

    const Denoiser& as_prior() const {
        if (null_view) return *null_view;
        return *net;
    }
};

std::optional<LoadedModel> load_model(const std::string& path) {
    if (path.empty()) return std::nullopt;
    LoadedModel m;
    m.ckpt = load_checkpoint(path);
    m.net = std::make_unique<TinyNet>(net_from_checkpoint(m.ckpt));
    return m;
}

VarianceSchedule schedule_of(const std::optional<LoadedModel>& a, const std::optional<LoadedModel>& b) {
    if (a && b && !(a->ckpt.schedule == b->ckpt.schedule)) {
        throw std::runtime_error("conditional and unconditional checkpoints use different schedules");
    }
    const ScheduleParams& p = a ? a->ckpt.schedule : b->ckpt.schedule;
    return VarianceSchedule::from_params(p);
}

void require_image_shape(const LoadedModel& m, const DatasetDir& ds, const std::string& what) {
    const auto& img = ds.manifest.at("image");
    const Shape expected{img.at("channels").get<std::size_t>(), img.at("height").get<std::size_t>(),
                         img.at("width").get<std::size_t>()};
    if (m.net->config().data_shape() != expected) {
        throw std::runtime_error(what + " checkpoint expects shape " + shape_string(m.net->config().data_shape()) +
                                 " but the dataset holds " + shape_string(expected));
    }
}

// ---------------------------------------------------------------- train

int cmd_train(const std::vector<std::string>& args, std::ostream& out) {
    std::string task;
    std::string data_dir;
    std::string out_dir;
    std::uint64_t seed = 1;
    int steps = 5000;
    int batch_size = 8;
    double learning_rate = 1e-3;
    double lambda_corr = kDefaultLambdaCorr;
    bool corr_enabled = true;
    double ema_alpha = 0.999;
    double null_prob = 0.1;
    bool unconditional = false;
    std::string arch = "conv";
    std::string hidden = "32,32";
    std::size_t embed_dim = 8;
    int timesteps = 100;
    double beta_start = 0.0;
    double beta_end = 0.0;
    std::string pretrained;
    bool force = false;

    RunConfig cfg("train", "Train a TinyNet noise predictor on a dataset directory");
    cfg.option("task", task, "expected dataset task (checked against the manifest)");
    cfg.option("data", data_dir, "dataset directory from gen-data");
    cfg.option("out", out_dir, "output directory for model.ckpt and loss.csv");
    cfg.option("seed", seed, "training seed");
    cfg.option("steps", steps, "optimizer steps");
    cfg.option("batch-size", batch_size, "batch size");
    cfg.option("learning-rate", learning_rate, "Adam learning rate");
    cfg.option("lambda-corr", lambda_corr, "weight of the correction loss");
    cfg.option("corr-enabled", corr_enabled, "evaluate the correction loss (conditional nets)");
    cfg.option("ema-alpha", ema_alpha, "EMA fusion rate toward --pretrained");
    cfg.option("null-prob", null_prob, "probability of training on the null token (conditional nets)");
    cfg.flag("unconditional", unconditional, "train an unconditional network");
    cfg.option("arch", arch, "conv | mlp");
    cfg.option("hidden", hidden, "comma-separated hidden widths");
    cfg.option("embed-dim", embed_dim, "time embedding size");
    cfg.option("timesteps", timesteps, "diffusion timesteps T");
    cfg.option("beta-start", beta_start, "first beta (0 = default for T)");
    cfg.option("beta-end", beta_end, "last beta (0 = default for T)");
    cfg.option("pretrained", pretrained, "checkpoint to fuse toward after each step");
    cfg.flag("force", force, "allow writing into a non-empty directory");
    if (!cfg.parse(args, out)) return kExitOk;

    require_flag(data_dir, "data");
    require_flag(out_dir, "out");
    if (timesteps < 1) throw UsageError("--timesteps must be positive");
    ScheduleParams sched_params = default_schedule_params(timesteps);
    if (beta_start > 0.0) sched_params.beta_start = beta_start;
    if (beta_end > 0.0) sched_params.beta_end = beta_end;
    VarianceSchedule schedule = [&] {
        try {
            return VarianceSchedule::from_params(sched_params);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    }();

    TrainConfig tc;
    tc.lambda_corr = lambda_corr;
    tc.ema_alpha = ema_alpha;
    tc.learning_rate = learning_rate;
    tc.batch_size = batch_size;
    tc.steps = steps;
    tc.seed = seed;
    tc.corr_enabled = corr_enabled;
    tc.null_token_prob = unconditional ? 0.0 : null_prob;
    try {
        tc.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }

    const DatasetDir ds = load_dataset_dir(data_dir);
    const std::string ds_task = ds.manifest.at("task").get<std::string>();
    if (!task.empty() && task != ds_task) {
        throw UsageError("--task " + task + " does not match dataset task " + ds_task);
    }
    const auto& img = ds.manifest.at("image");
    NetConfig nc;
    try {
        nc.kind = net_kind_from_string(arch);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    nc.channels = img.at("channels").get<std::size_t>();
    nc.height = img.at("height").get<std::size_t>();
    nc.width = img.at("width").get<std::size_t>();
    nc.conditional = !unconditional;
    nc.embed_dim = embed_dim;
    nc.hidden = parse_widths(hidden);

    TinyNet net(nc);
    net.init(derive_seed(seed, 1));

    std::optional<WeightVector> pre;
    nlohmann::json fusion = nullptr;
    if (!pretrained.empty()) {
        const Checkpoint p = load_checkpoint(pretrained);
        if (p.fingerprint != net.fingerprint()) {
            throw std::runtime_error("--pretrained fingerprint '" + p.fingerprint + "' does not match network '" +
                                     net.fingerprint() + "'");
        }
        pre = WeightVector{p.fingerprint, p.weights};
        std::string raw;
        for (double w : p.weights) raw.append(reinterpret_cast<const char*>(&w), sizeof(w));
        fusion = {{"alpha", ema_alpha}, {"pretrained_fingerprint", p.fingerprint},
                  {"pretrained_weights_fnv1a", hex64(fnv1a64(raw))}};
    }

    const fs::path dir(out_dir);
    prepare_output_dir(dir, force);
    SidecarLog log(dir / "run.log");
    const TrainResult result = train(std::move(net), ds.data.train, tc, schedule, pre ? &*pre : nullptr);

    std::ostringstream csv;
    csv << "step,L_simple,L_corr,L_final\n";
    for (const LossRow& r : result.curve) {
        csv << r.step << ',' << fixed(r.simple, 8) << ',' << fixed(r.corr, 8) << ',' << fixed(r.final, 8) << '\n';
    }
    write_file(dir / "loss.csv", csv.str());

    const nlohmann::json metadata = {
        {"task", ds_task},
        {"dataset", {{"seed", ds.manifest.at("seed")},
                     {"manifest_fnv1a", hex64(fnv1a64(read_file(fs::path(data_dir) / "manifest.json")))}}},
        {"ema_fusion", fusion}};
    const Checkpoint ckpt = make_checkpoint(result.net, sched_params, tc, result.steps, metadata);
    save_checkpoint(dir / "model.ckpt", ckpt);
    write_run_config(dir, cfg);
    log.line("fingerprint " + ckpt.fingerprint);
    log.finish();

    out << "trained " << ckpt.fingerprint << " for " << result.steps << " steps; final L_simple "
        << fixed(result.curve.back().simple, 4) << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------- sample

struct SamplingSetup {
    std::optional<LoadedModel> cond;
    std::optional<LoadedModel> uncond;
    SamplerModels models;
};

void attach_models(SamplingSetup& s) {
    if (s.cond) {
        if (!s.cond->net->is_conditional()) throw std::runtime_error("--cond checkpoint holds an unconditional network");
        s.models.cond = s.cond->net.get();
        s.models.cond_net = s.cond->net.get();
    }
    if (s.uncond) {
        if (s.uncond->net->is_conditional()) s.uncond->null_view = std::make_unique<NullTokenView>(*s.uncond->net);
        s.models.uncond = &s.uncond->as_prior();
    }
}

void check_mode_models(SamplerMode mode, const SamplingSetup& s, bool null_token_requested) {
    switch (mode) {
        case SamplerMode::plain:
        case SamplerMode::cdp:
            if (!s.uncond) throw UsageError("mode " + to_string(mode) + " needs an unconditional model (--uncond)");
            break;
        case SamplerMode::conditional:
            if (!s.cond) throw UsageError("mode conditional needs a conditional model (--cond)");
            break;
        case SamplerMode::binoising:
            if (!s.cond) throw UsageError("mode binoising needs a conditional model (--cond)");
            if (!s.uncond) {
                throw UsageError("mode binoising needs an unconditional model: pass --uncond, or --null-token to "
                                 "use the conditional model's null-token view");
            }
            break;
        case SamplerMode::binoising_null:
            if (!s.cond) throw UsageError("mode binoising_null needs a conditional model (--cond)");
            if (s.cond->ckpt.train.null_token_prob <= 0.0 && !null_token_requested) {
                throw std::runtime_error("conditional checkpoint was trained without null tokens");
            }
            break;
    }
}

int cmd_sample(const std::vector<std::string>& args, std::ostream& out) {
    std::string data_dir;
    std::string split = "test";
    std::string mode_name = "binoising";
    std::string cond_path;
    std::string uncond_path;
    bool null_token = false;
    std::uint64_t seed = 0;
    bool trace = false;
    long limit = 0;
    bool clamp_x0 = true;
    int cdp_factor = 4;
    std::string out_dir;
    bool force = false;

    RunConfig cfg("sample", "Restore the images of a dataset split with a sampler");
    cfg.option("data", data_dir, "dataset directory");
    cfg.option("split", split, "train | test | all");
    cfg.option("mode", mode_name, "plain | conditional | cdp | binoising | binoising_null");
    cfg.option("cond", cond_path, "conditional checkpoint");
    cfg.option("uncond", uncond_path, "unconditional checkpoint");
    cfg.flag("null-token", null_token, "use the conditional model's null-token view as the prior");
    cfg.option("seed", seed, "sampling seed");
    cfg.flag("trace", trace, "write the implicit prediction of every step");
    cfg.option("limit", limit, "sample at most this many images (0 = all)");
    cfg.option("clamp-x0", clamp_x0, "clip the implicit prediction during bi-noising");
    cfg.option("cdp-factor", cdp_factor, "low-pass factor for cdp");
    cfg.option("out", out_dir, "output directory");
    cfg.flag("force", force, "allow writing into a non-empty directory");
    if (!cfg.parse(args, out)) return kExitOk;

    require_flag(data_dir, "data");
    require_flag(out_dir, "out");
    if (limit < 0) throw UsageError("--limit must be non-negative");
    SamplerMode mode;
    try {
        mode = sampler_mode_from_string(mode_name);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    if (mode == SamplerMode::binoising && null_token) mode = SamplerMode::binoising_null;

    SamplingSetup setup;
    setup.cond = load_model(cond_path);
    setup.uncond = load_model(uncond_path);
    check_mode_models(mode, setup, null_token);
    attach_models(setup);

    const DatasetDir ds = load_dataset_dir(data_dir);
    if (setup.cond) require_image_shape(*setup.cond, ds, "--cond");
    if (setup.uncond) require_image_shape(*setup.uncond, ds, "--uncond");
    std::vector<PairedSample> items = dataset_split(ds, split);
    if (limit > 0 && static_cast<std::size_t>(limit) < items.size()) items.resize(static_cast<std::size_t>(limit));

    SamplerSpec spec(mode, schedule_of(setup.cond, setup.uncond));
    spec.clamp_x0 = clamp_x0;
    if (mode == SamplerMode::cdp) spec.cdp_factor = cdp_factor;
    try {
        spec.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }

    const fs::path dir(out_dir);
    prepare_output_dir(dir, force);
    SidecarLog log(dir / "run.log");
    std::vector<Tensor> results(items.size());
    std::vector<TraceRecord> traces(items.size());
    parallel_for(items.size(), configured_threads(), [&](std::size_t i) {
        SamplerSpec local = spec;
        local.seed = derive_seed(seed, i);
        const Tensor& x0 = items[i].x0;
        results[i] = sample(local, setup.models, &x0, x0.shape(), trace ? &traces[i] : nullptr).clipped();
    });

    nlohmann::json ids = nlohmann::json::array();
    for (std::size_t i = 0; i < items.size(); ++i) {
        write_image(dir / (items[i].id + ".ppm"), results[i]);
        ids.push_back(items[i].id);
        if (trace) {
            const fs::path frames = dir / "trace" / items[i].id;
            fs::create_directories(frames);
            for (const TraceStep& step : traces[i]) {
                char name[32];
                std::snprintf(name, sizeof(name), "t%04d.ppm", step.t);
                Tensor frame = step.x0_pred;
                frame.set_range(ds.range);
                write_image(frames / name, frame.clipped());
            }
        }
    }
    const nlohmann::json manifest = {{"mode", to_string(mode)}, {"seed", seed}, {"split", split},
                                     {"timesteps", spec.schedule.timesteps()}, {"ids", ids},
                                     {"value_range", {ds.range.lo, ds.range.hi}}};
    write_file(dir / "outputs.json", manifest.dump(2) + "\n");
    write_run_config(dir, cfg);
    log.finish();
    out << "sampled " << items.size() << " images with mode " << to_string(mode) << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------- eval

struct MetricRow {
    std::string id;
    double mse;
    double psnr;
    double ssim;
};

std::string format_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> widths(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) widths[c] = header[c].size();
    for (const auto& r : rows)
        for (std::size_t c = 0; c < r.size(); ++c) widths[c] = std::max(widths[c], r[c].size());
    std::ostringstream out;
    auto emit = [&](const std::vector<std::string>& r) {
        for (std::size_t c = 0; c < r.size(); ++c) {
            out << (c ? "  " : "") << (c ? std::right : std::left) << std::setw(static_cast<int>(widths[c])) << r[c];
        }
        out << '\n';
    };
    emit(header);
    std::size_t total = 0;
    for (std::size_t w : widths) total += w;
    out << std::string(total + 2 * (widths.size() - 1), '-') << '\n';
    for (const auto& r : rows) emit(r);
    return out.str();
}

int cmd_eval(const std::vector<std::string>& args, std::ostream& out) {
    std::string outputs_dir;
    std::string data_dir;
    std::string split = "test";
    std::string out_dir;
    double peak = 0.0;
    bool force = false;

    RunConfig cfg("eval", "Score restored images against the dataset's clean images");
    cfg.option("outputs", outputs_dir, "directory of <id>.ppm outputs");
    cfg.option("data", data_dir, "dataset directory holding the ground truth");
    cfg.option("split", split, "train | test | all");
    cfg.option("out", out_dir, "report directory");
    cfg.option("peak", peak, "PSNR peak (0 = width of the value range)");
    cfg.flag("force", force, "allow writing into a non-empty directory");
    if (!cfg.parse(args, out)) return kExitOk;

    require_flag(outputs_dir, "outputs");
    require_flag(data_dir, "data");
    require_flag(out_dir, "out");
    if (peak < 0.0) throw UsageError("--peak must be non-negative");

    const DatasetDir ds = load_dataset_dir(data_dir);
    const std::vector<PairedSample> items = dataset_split(ds, split);
    const double use_peak = peak > 0.0 ? peak : ds.range.width();

    std::vector<std::string> missing;
    for (const PairedSample& s : items) {
        if (!fs::exists(fs::path(outputs_dir) / (s.id + ".ppm"))) missing.push_back(s.id);
    }
    if (!missing.empty()) {
        std::string list;
        for (const std::string& id : missing) list += (list.empty() ? "" : ", ") + id;
        throw std::runtime_error("missing outputs for " + std::to_string(missing.size()) + " id(s): " + list);
    }
    std::size_t found = 0;
    for (const auto& entry : fs::directory_iterator(outputs_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".ppm") ++found;
    }
    if (found != items.size()) {
        throw std::runtime_error("output count mismatch: " + std::to_string(found) + " images in " + outputs_dir +
                                 ", " + std::to_string(items.size()) + " in split " + split);
    }

    std::vector<MetricRow> rows(items.size());
    parallel_for(items.size(), configured_threads(), [&](std::size_t i) {
        const Tensor restored = read_image(fs::path(outputs_dir) / (items[i].id + ".ppm"), ds.range);
        rows[i] = {items[i].id, mse(restored, items[i].y0), psnr(restored, items[i].y0, use_peak),
                   ssim(restored, items[i].y0, ds.range.width())};
    });

    double m = 0.0, p = 0.0, s = 0.0;
    std::ostringstream csv;
    csv << "id,mse,psnr,ssim\n";
    std::vector<std::vector<std::string>> table;
    for (const MetricRow& r : rows) {
        csv << r.id << ',' << fixed(r.mse, 4) << ',' << fixed(r.psnr, 4) << ',' << fixed(r.ssim, 4) << '\n';
        table.push_back({r.id, fixed(r.mse, 4), fixed(r.psnr, 4), fixed(r.ssim, 4)});
        m += r.mse;
        p += r.psnr;
        s += r.ssim;
    }
    const double n = static_cast<double>(rows.size());
    csv << "mean," << fixed(m / n, 4) << ',' << fixed(p / n, 4) << ',' << fixed(s / n, 4) << '\n';
    table.push_back({"mean", fixed(m / n, 4), fixed(p / n, 4), fixed(s / n, 4)});
    const std::string text = format_table({"id", "MSE", "PSNR", "SSIM"}, table);

    const fs::path dir(out_dir);
    prepare_output_dir(dir, force);
    SidecarLog log(dir / "run.log");
    write_file(dir / "metrics.csv", csv.str());
    write_file(dir / "metrics.txt", text);
    write_run_config(dir, cfg);
    log.finish();
    out << text;
    return kExitOk;
}

// ---------------------------------------------------------------- compare

int cmd_compare(const std::vector<std::string>& args, std::ostream& out) {
    std::string data_dir;
    std::string split = "test";
    std::string cond_path;
    std::string uncond_path;
    std::uint64_t seed = 0;
    long limit = 0;
    int cdp_factor = 4;
    bool clamp_x0 = true;
    bool best_effort = false;
    std::string out_dir;
    bool force = false;

    RunConfig cfg("compare", "Run the sampler matrix on one split and tabulate metrics");
    cfg.option("data", data_dir, "dataset directory");
    cfg.option("split", split, "train | test | all");
    cfg.option("cond", cond_path, "conditional checkpoint");
    cfg.option("uncond", uncond_path, "unconditional checkpoint");
    cfg.option("seed", seed, "sampling seed shared by every mode");
    cfg.option("limit", limit, "use at most this many images (0 = all)");
    cfg.option("cdp-factor", cdp_factor, "low-pass factor for cdp");
    cfg.option("clamp-x0", clamp_x0, "clip the implicit prediction during bi-noising");
    cfg.flag("best-effort", best_effort, "skip modes whose models are missing instead of failing");
    cfg.option("out", out_dir, "report directory");
    cfg.flag("force", force, "allow writing into a non-empty directory");
    if (!cfg.parse(args, out)) return kExitOk;

    require_flag(data_dir, "data");
    require_flag(out_dir, "out");
    if (limit < 0) throw UsageError("--limit must be non-negative");

    SamplingSetup setup;
    setup.cond = load_model(cond_path);
    setup.uncond = load_model(uncond_path);
    attach_models(setup);
    if (!setup.cond && !setup.uncond) throw UsageError("compare needs --cond and/or --uncond");

    const DatasetDir ds = load_dataset_dir(data_dir);
    if (setup.cond) require_image_shape(*setup.cond, ds, "--cond");
    if (setup.uncond) require_image_shape(*setup.uncond, ds, "--uncond");
    std::vector<PairedSample> items = dataset_split(ds, split);
    if (limit > 0 && static_cast<std::size_t>(limit) < items.size()) items.resize(static_cast<std::size_t>(limit));
    const VarianceSchedule schedule = schedule_of(setup.cond, setup.uncond);

    const std::vector<SamplerMode> modes{SamplerMode::conditional, SamplerMode::cdp, SamplerMode::binoising,
                                         SamplerMode::binoising_null};
    struct Column {
        bool ok = false;
        std::string failure;
        double psnr = 0.0, ssim = 0.0, mse = 0.0;
        std::size_t params = 0;
        double seconds_per_sample = 0.0;
    };
    std::vector<Column> columns(modes.size());

    const fs::path dir(out_dir);
    for (std::size_t k = 0; k < modes.size(); ++k) {
        try {
            check_mode_models(modes[k], setup, false);
        } catch (const std::exception& e) {
            if (!best_effort) throw;
            columns[k].failure = e.what();
        }
    }
    prepare_output_dir(dir, force);
    SidecarLog log(dir / "run.log");

    const unsigned threads = configured_threads();
    for (std::size_t k = 0; k < modes.size(); ++k) {
        Column& col = columns[k];
        if (!col.failure.empty()) {
            out << "skipping " << to_string(modes[k]) << ": " << col.failure << '\n';
            log.line("skipped " + to_string(modes[k]) + ": " + col.failure);
            continue;
        }
        SamplerSpec spec(modes[k], schedule);
        spec.clamp_x0 = clamp_x0;
        if (modes[k] == SamplerMode::cdp) spec.cdp_factor = cdp_factor;
        std::vector<MetricRow> rows(items.size());
        const auto start = std::chrono::steady_clock::now();
        parallel_for(items.size(), threads, [&](std::size_t i) {
            SamplerSpec local = spec;
            local.seed = derive_seed(seed, i);
            const Tensor& x0 = items[i].x0;
            const Tensor restored = sample(local, setup.models, &x0, x0.shape()).clipped();
            rows[i] = {items[i].id, mse(restored, items[i].y0), psnr(restored, items[i].y0, ds.range.width()),
                       ssim(restored, items[i].y0, ds.range.width())};
        });
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        for (const MetricRow& r : rows) {
            col.psnr += r.psnr;
            col.ssim += r.ssim;
            col.mse += r.mse;
        }
        const double n = static_cast<double>(rows.size());
        col.psnr /= n;
        col.ssim /= n;
        col.mse /= n;
        col.params = sampler_parameter_count(modes[k], setup.models);
        col.seconds_per_sample = secs / n;
        col.ok = true;
        log.line(to_string(modes[k]) + " seconds_per_sample " + fixed(col.seconds_per_sample, 6));
    }

    std::vector<std::string> header{"metric"};
    for (SamplerMode m : modes) header.push_back(to_string(m));
    auto row_of = [&](const std::string& name, auto value) {
        std::vector<std::string> r{name};
        for (const Column& c : columns) r.push_back(c.ok ? value(c) : std::string("n/a"));
        return r;
    };
    std::vector<std::vector<std::string>> rows{
        row_of("psnr", [](const Column& c) { return fixed(c.psnr, 4); }),
        row_of("ssim", [](const Column& c) { return fixed(c.ssim, 4); }),
        row_of("mse", [](const Column& c) { return fixed(c.mse, 4); }),
        row_of("parameters", [](const Column& c) { return std::to_string(c.params); }),
    };
    std::ostringstream csv;
    for (std::size_t c = 0; c < header.size(); ++c) csv << (c ? "," : "") << header[c];
    csv << '\n';
    for (const auto& r : rows) {
        for (std::size_t c = 0; c < r.size(); ++c) csv << (c ? "," : "") << r[c];
        csv << '\n';
    }
    const std::string text = format_table(header, rows);
    write_file(dir / "compare.csv", csv.str());
    write_file(dir / "compare.txt", text);
    write_run_config(dir, cfg);
    log.finish();

    rows.push_back(row_of("sec/sample", [](const Column& c) { return fixed(c.seconds_per_sample, 4); }));
    out << format_table(header, rows);
    return kExitOk;
}

}  // namespace

DatasetDir load_dataset_dir(const fs::path& dir) {
    const fs::path manifest_path = dir / "manifest.json";
    if (!fs::exists(manifest_path)) throw std::runtime_error("no manifest.json in " + dir.string());
    DatasetDir ds;
    try {
        ds.manifest = nlohmann::json::parse(read_file(manifest_path));
        const auto& range = ds.manifest.at("value_range");
        ds.range = {range.at(0).get<double>(), range.at(1).get<double>()};
        for (const auto& pair : ds.manifest.at("pairs")) {
            PairedSample s;
            s.id = pair.at("id").get<std::string>();
            s.y0 = read_image(dir / pair.at("clean").get<std::string>(), ds.range);
            s.x0 = read_image(dir / pair.at("degraded").get<std::string>(), ds.range);
            const std::string split = pair.at("split").get<std::string>();
            if (split == "train") {
                ds.data.train.push_back(std::move(s));
            } else if (split == "test") {
                ds.data.test.push_back(std::move(s));
            } else {
                throw std::runtime_error("unknown split '" + split + "' for id " + s.id);
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed manifest in " + dir.string() + ": " + e.what());
    }
    return ds;
}

std::vector<PairedSample> dataset_split(const DatasetDir& ds, const std::string& split) {
    if (split == "train") return ds.data.train;
    if (split == "test") return ds.data.test;
    if (split == "all") {
        std::vector<PairedSample> all = ds.data.train;
        all.insert(all.end(), ds.data.test.begin(), ds.data.test.end());
        return all;
    }
    throw UsageError("unknown split '" + split + "' (expected train, test or all)");
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    static const std::map<std::string, int (*)(const std::vector<std::string>&, std::ostream&)> verbs{
        {"gen-data", cmd_gen_data}, {"train", cmd_train}, {"sample", cmd_sample},
        {"eval", cmd_eval},         {"compare", cmd_compare}};
    if (args.empty() || args[0] == "--help" || args[0] == "-h") {
        out << "usage: binoise <gen-data|train|sample|eval|compare> [options]\n"
               "run 'binoise <verb> --help' for the options of a verb\n";
        return args.empty() ? kExitUsage : kExitOk;
    }
    const auto it = verbs.find(args[0]);
    if (it == verbs.end()) {
        err << "error: unknown command '" << args[0] << "'\n";
        return kExitUsage;
    }
    try {
        return it->second(std::vector<std::string>(args.begin() + 1, args.end()), out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

}  // namespace binoise
