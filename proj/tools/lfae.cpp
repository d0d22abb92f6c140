// lfae: train, encode, decode, evaluate and inspect light-field autoencoders.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "lfae/lfae.hpp"

namespace fs = std::filesystem;

namespace {

struct ModelFlags {
    bool toy = false;
    std::optional<std::size_t> grid;
    std::optional<std::size_t> spatial;
    std::vector<std::size_t> schedule;
    std::optional<std::size_t> decoder_out;

    void add_to(CLI::App& cmd)
    {
        cmd.add_flag("--toy", toy, "Start from the 3x3 / 32px toy architecture");
        cmd.add_option("--grid", grid, "Views per grid side (odd)");
        cmd.add_option("--spatial", spatial, "View width and height in pixels (multiple of 32)");
        cmd.add_option("--schedule", schedule, "Five encoder channel widths")->expected(5)->delimiter(',');
        cmd.add_option("--decoder-out", decoder_out, "Decoder output channels (default: stacked channels - 3)");
    }

    lfae::ModelConfig build(std::uint64_t seed) const
    {
        lfae::ModelConfig cfg = toy ? lfae::toy_config() : lfae::ModelConfig{};
        if (grid) {
            cfg.grid_rows = cfg.grid_cols = *grid;
        }
        if (spatial) {
            cfg.spatial = *spatial;
        }
        if (!schedule.empty()) {
            cfg.channel_schedule = schedule;
        }
        cfg.decoder_out_channels = decoder_out ? *decoder_out : cfg.stacked_channels() - lfae::kRgb;
        cfg.init_seed = seed;
        lfae::validate(cfg);
        return cfg;
    }
};

struct Shared {
    std::uint64_t seed = 0;
    std::string out;
    std::string pattern = lfae::DatasetLayout{}.pattern;
};

double seconds_since(std::chrono::steady_clock::time_point start)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

lfae::DatasetLayout layout_for(const fs::path& root, const std::string& pattern, const lfae::ModelConfig& cfg)
{
    return {root, pattern, cfg.grid_rows, cfg.grid_cols};
}

lfae::Model<float> load_model(const fs::path& path)
{
    lfae::Model<float> m = lfae::read_checkpoint_file<float>(path).model;
    m.mode = lfae::Mode::eval;
    return m;
}

void require_out(const Shared& shared, const char* what)
{
    if (shared.out.empty()) {
        throw lfae::ConfigError(std::string("--out is required: ") + what);
    }
}

// train --------------------------------------------------------------------

struct TrainArgs {
    std::string data;
    std::vector<std::string> test;
    std::string resume;
    std::size_t epochs = lfae::TrainConfig{}.total_epochs;
    std::size_t iters = lfae::TrainConfig{}.iterations_per_epoch;
    std::size_t batch = lfae::TrainConfig{}.batch_size;
    std::size_t checkpoint_every = lfae::TrainConfig{}.checkpoint_every;
    std::string checkpoint_dir;
    std::optional<std::size_t> min_crop;
    bool no_augment = false;
    ModelFlags model;
};

int cmd_train(const TrainArgs& a, const Shared& shared)
{
    require_out(shared, "path of the training history CSV");
    lfae::TrainConfig tcfg;
    tcfg.total_epochs = a.epochs;
    tcfg.iterations_per_epoch = a.iters;
    tcfg.batch_size = a.batch;
    tcfg.seed = shared.seed;
    tcfg.checkpoint_every = a.checkpoint_every;
    tcfg.checkpoint_dir = a.checkpoint_dir;
    lfae::validate(tcfg);

    lfae::TrainerState<float> state;
    lfae::Model<float> model;
    if (!a.resume.empty()) {
        lfae::Checkpoint<float> ck = lfae::read_checkpoint_file<float>(a.resume);
        model = std::move(ck.model);
        state.optimizer = ck.optimizer.value_or(lfae::AdamState<float>{});
        state.completed_epochs = ck.completed_epochs;
        std::cout << fmt::format("resuming after epoch {}\n", state.completed_epochs);
    } else {
        model = lfae::build_model<float>(a.model.build(shared.seed));
    }
    const lfae::ModelConfig& mcfg = model.config;

    lfae::AugmentConfig acfg;
    acfg.seed = shared.seed;
    acfg.min_crop = a.min_crop.value_or(std::min(acfg.min_crop, mcfg.spatial));
    if (a.no_augment) {
        acfg.brightness_range = {0.0, 0.0};
        acfg.saturation_range = {1.0, 1.0};
        acfg.flip_probability = 0.0;
        acfg.min_crop = mcfg.spatial;
    }
    lfae::validate(acfg);

    const lfae::DatasetLayout layout = layout_for(a.data, shared.pattern, mcfg);
    const std::vector<std::string> names = lfae::list_light_fields(layout);
    if (names.empty()) {
        throw lfae::IoError("no light fields found under " + a.data);
    }
    lfae::check_light_field(mcfg, lfae::load_light_field(layout, names.front()), "train");
    lfae::TrainHooks hooks;
    for (const std::string& name : a.test) {
        hooks.test_fields.push_back(lfae::load_light_field(layout, name));
        lfae::check_light_field(mcfg, hooks.test_fields.back(), "train");
    }
    hooks.on_epoch = [](const lfae::EpochRecord& r) {
        std::cout << fmt::format("epoch {:4}  lr {:.1e}  train_mse {:.7f}", r.epoch, r.lr, r.train_mse);
        if (r.test_mse) {
            std::cout << fmt::format("  test_mse {:.7f}", *r.test_mse);
        }
        std::cout << std::endl;
    };
    std::cout << fmt::format("training on {} light fields, {} epochs x {} iterations, batch {}\n", names.size(),
                             tcfg.total_epochs, tcfg.iterations_per_epoch, tcfg.batch_size);

    const lfae::StreamingSampler sampler(
        names.size(), [layout, names](std::size_t i) { return lfae::load_light_field(layout, names[i]); }, acfg);
    const lfae::TrainHistory history = lfae::train(model, sampler, tcfg, state, hooks);
    lfae::write_history_csv(history, fs::path(shared.out));
    if (!a.checkpoint_dir.empty()) {
        const fs::path final_path = fs::path(a.checkpoint_dir) / "final.lfck";
        lfae::write_checkpoint_file(lfae::Checkpoint<float>{model, state.optimizer, state.completed_epochs},
                                    final_path);
        std::cout << "checkpoint " << final_path.string() << '\n';
    }
    std::cout << "history " << shared.out << '\n';
    return 0;
}

// encode / decode ------------------------------------------------------------

struct CodecArgs {
    std::string checkpoint;
    std::string input;
};

int cmd_encode(const CodecArgs& a, const Shared& shared)
{
    require_out(shared, "path of the .lfae file");
    const lfae::Model<float> model = load_model(a.checkpoint);
    const lfae::LightField lf = lfae::load_light_field(layout_for(a.input, shared.pattern, model.config), "");
    const auto start = std::chrono::steady_clock::now();
    const lfae::EncodedLightField enc = lfae::encode(model, lf);
    const double elapsed = seconds_since(start);
    lfae::write_encoded_file(enc, shared.out);
    const std::uint64_t raw = static_cast<std::uint64_t>(lf.view_count()) * lf.height() * lf.width() * lfae::kRgb;
    const std::uint64_t bytes = fs::file_size(shared.out);
    std::cout << fmt::format("encoded {} views in {:.3f} s\n", lf.view_count(), elapsed);
    std::cout << fmt::format("wrote {} ({} bytes, {:.2f}x smaller than the {}-byte float field)\n", shared.out,
                             bytes, static_cast<double>(raw * 4) / static_cast<double>(bytes), raw * 4);
    return 0;
}

int cmd_decode(const CodecArgs& a, const Shared& shared)
{
    require_out(shared, "directory for the decoded views");
    const lfae::Model<float> model = load_model(a.checkpoint);
    const lfae::EncodedLightField enc = lfae::read_encoded_file(a.input);
    const auto start = std::chrono::steady_clock::now();
    const lfae::LightField lf = lfae::decode(model, enc);
    const double elapsed = seconds_since(start);
    lfae::save_light_field(lf, shared.out, shared.pattern);
    std::cout << fmt::format("decoded {} views in {:.3f} s\n", lf.view_count(), elapsed);
    std::cout << fmt::format("wrote {} views of {}x{} to {}\n", lf.view_count(), lf.height(), lf.width(), shared.out);
    return 0;
}

// eval ----------------------------------------------------------------------

struct EvalArgs {
    std::string checkpoint;
    std::string data;
    std::vector<std::string> samples;
    bool identity = false;
    std::size_t grid = 9;
};

int cmd_eval(const EvalArgs& a, const Shared& shared)
{
    if (!a.identity && a.checkpoint.empty()) {
        throw lfae::ConfigError("eval needs --checkpoint unless --identity is given");
    }
    std::optional<lfae::Model<float>> model;
    lfae::DatasetLayout layout{a.data, shared.pattern, a.grid, a.grid};
    if (!a.identity) {
        model = load_model(a.checkpoint);
        layout.rows = model->config.grid_rows;
        layout.cols = model->config.grid_cols;
    }
    const std::vector<std::string> names = a.samples.empty() ? lfae::list_light_fields(layout) : a.samples;
    if (names.empty()) {
        throw lfae::IoError("no light fields found under " + a.data);
    }
    std::vector<lfae::QualityRow> rows;
    for (const std::string& name : names) {
        const lfae::LightField lf = lfae::load_light_field(layout, name);
        if (a.identity) {
            rows.push_back(lfae::quality_row(name, lf, lf));
        } else {
            rows.push_back(lfae::quality_row(name, lf, lfae::forward(*model, lf)));
        }
    }
    const lfae::QualityReport report = lfae::make_report(std::move(rows));
    lfae::write_report_table(report, std::cout);
    if (!shared.out.empty()) {
        std::ofstream os(shared.out);
        if (!os) {
            throw lfae::IoError("cannot open " + shared.out + " for writing");
        }
        lfae::write_report_csv(report, os);
    }
    return 0;
}

// info ----------------------------------------------------------------------

struct InfoArgs {
    std::string checkpoint;
    ModelFlags model;
};

int cmd_info(const InfoArgs& a, const Shared& shared)
{
    const lfae::ModelConfig cfg =
        a.checkpoint.empty() ? a.model.build(shared.seed) : lfae::read_checkpoint_file<float>(a.checkpoint).model.config;
    const std::size_t params = lfae::parameter_count(cfg);
    std::cout << fmt::format("grid              {}x{} views of {}x{}\n", cfg.grid_rows, cfg.grid_cols, cfg.spatial,
                             cfg.spatial);
    std::cout << fmt::format("latent            {}x{}x{}\n", cfg.latent_channels(), cfg.latent_spatial(),
                             cfg.latent_spatial());
    std::cout << fmt::format("compression ratio {:.3f}\n", lfae::compression_ratio(cfg));
    std::cout << fmt::format("parameters        {}\n", params);
    std::cout << fmt::format("model bytes (f32) {}\n", 4 * params);
    std::cout << fmt::format("encoded file      {} bytes\n",
                             lfae::encoded_file_bytes(cfg.spatial, cfg.latent_channels()));
    std::cout << fmt::format("\n{:<10} {:>22} {:>22} {:>12}\n", "layer", "input", "output", "parameters");
    for (const lfae::LayerInfo& l : lfae::layer_table(cfg)) {
        std::cout << fmt::format("{:<10} {:>22} {:>22} {:>12}\n", l.name, lfae::to_string(l.input),
                                 lfae::to_string(l.output), l.parameters);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Light-field autoencoder: train, encode, decode, evaluate and inspect.\n"
                 "Settings are taken from command-line flags first, then the --config file, then built-in "
                 "defaults.\nConfig files hold key=value lines; subcommand keys go under a [train], [encode], "
                 "... section."};
    app.require_subcommand(1);
    app.fallthrough();

    Shared shared;
    app.set_config("--config", "", "key=value settings file (command-line flags take precedence)");
    app.add_option("--seed", shared.seed, "Seed for initialization, sampling and augmentation");
    app.add_option("--out", shared.out, "Output path (history CSV, .lfae file, view directory or report CSV)");
    app.add_option("--pattern", shared.pattern, "View filename pattern with an {index} field");

    TrainArgs train_args;
    CLI::App* train = app.add_subcommand("train", "Train a model on a directory of light fields");
    train->add_option("--data", train_args.data, "Dataset root")->required();
    train->add_option("--test", train_args.test, "Held-out light fields (relative to --data) scored each epoch");
    train->add_option("--resume", train_args.resume, "Continue from a checkpoint");
    train->add_option("--epochs", train_args.epochs, "Total epochs")->capture_default_str();
    train->add_option("--iters-per-epoch", train_args.iters, "Iterations per epoch")->capture_default_str();
    train->add_option("--batch", train_args.batch, "Light fields per iteration")->capture_default_str();
    train->add_option("--checkpoint-dir", train_args.checkpoint_dir, "Directory for periodic checkpoints");
    train->add_option("--checkpoint-every", train_args.checkpoint_every, "Checkpoint interval in epochs")
        ->capture_default_str();
    train->add_option("--min-crop", train_args.min_crop, "Smallest random crop side");
    train->add_flag("--no-augment", train_args.no_augment, "Disable flips, color jitter and crops");
    train_args.model.add_to(*train);

    CodecArgs encode_args;
    CLI::App* encode = app.add_subcommand("encode", "Compress one light field to a .lfae file");
    encode->add_option("--checkpoint", encode_args.checkpoint, "Trained model")->required();
    encode->add_option("--input", encode_args.input, "Directory holding the views")->required();

    CodecArgs decode_args;
    CLI::App* decode = app.add_subcommand("decode", "Reconstruct a light field from a .lfae file");
    decode->add_option("--checkpoint", decode_args.checkpoint, "Trained model")->required();
    decode->add_option("--input", decode_args.input, ".lfae file")->required();

    EvalArgs eval_args;
    CLI::App* eval = app.add_subcommand("eval", "Score reconstructions with MSE, PSNR and SSIM");
    eval->add_option("--checkpoint", eval_args.checkpoint, "Trained model");
    eval->add_option("--data", eval_args.data, "Dataset root")->required();
    eval->add_option("--samples", eval_args.samples, "Light fields to score (default: all under --data)");
    eval->add_flag("--identity", eval_args.identity, "Compare each field with itself (no model)");
    eval->add_option("--grid", eval_args.grid, "Views per grid side in --identity mode")->capture_default_str();

    InfoArgs info_args;
    CLI::App* info = app.add_subcommand("info", "Print compression ratio, size and layer shapes");
    info->add_option("--checkpoint", info_args.checkpoint, "Read the architecture from a checkpoint");
    info_args.model.add_to(*info);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*train) {
            return cmd_train(train_args, shared);
        }
        if (*encode) {
            return cmd_encode(encode_args, shared);
        }
        if (*decode) {
            return cmd_decode(decode_args, shared);
        }
        if (*eval) {
            return cmd_eval(eval_args, shared);
        }
        return cmd_info(info_args, shared);
    } catch (const lfae::Error& e) {
        std::cerr << "error[" << e.category() << "]: " << e.what() << '\n';
    } catch (const std::exception& e) {
        std::cerr << "error[internal]: " << e.what() << '\n';
    }
    return 1;
}
