// stc: streaming token compression driver.
//
//   stc run        --config <file> [--no-fidelity] [--out <path>] [--format json|csv]
//   stc gen        --frames N --tokens T --dim D --rho R --sigma S --event-period P --seed K --out <file>
//   stc redundancy --config <file> --stride S --out <path>
//   stc bench      --config <file> --repeats R
//
// Exit codes: 0 success, 2 config error, 3 I/O error, 1 anything else.

#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "stc/harness.hpp"

namespace {

constexpr int kConfigExit = 2;
constexpr int kIoExit = 3;

void write_text(const std::string& text, const std::string& path) {
    if (path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out || !(out << text) || !out.flush()) {
        throw stc::IoError("cannot write '" + path + "'");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Streaming token compression toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_path;

    auto* run = app.add_subcommand("run", "Run the cacher/pruner pipeline and write a metrics report");
    bool no_fidelity = false;
    std::string format;
    run->add_option("--config", config_path, "Flat JSON run config")->required();
    run->add_flag("--no-fidelity", no_fidelity, "Skip the full-forward fidelity oracle");
    run->add_option("--out", out_path, "Report path (default: config output_path, else stdout)");
    run->add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));

    auto* gen = app.add_subcommand("gen", "Generate a synthetic stream as an STC1 tensor file");
    stc::StreamConfig sc;
    gen->add_option("--frames", sc.num_frames)->required();
    gen->add_option("--tokens", sc.token_count)->required();
    gen->add_option("--dim", sc.dim)->required();
    gen->add_option("--rho", sc.redundancy)->required();
    gen->add_option("--sigma", sc.drift)->required();
    gen->add_option("--event-period", sc.event_period)->required();
    gen->add_option("--seed", sc.seed)->required();
    gen->add_option("--out", out_path)->required();

    auto* red = app.add_subcommand("redundancy", "Per-layer adjacent-frame cosine similarity profile");
    std::size_t stride = 1;
    red->add_option("--config", config_path)->required();
    red->add_option("--stride", stride)->required();
    red->add_option("--out", out_path)->required();

    auto* bench = app.add_subcommand("bench", "Median wall-clock of full vs. cached encoding");
    std::size_t repeats = 5;
    bench->add_option("--config", config_path)->required();
    bench->add_option("--repeats", repeats)->required()->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kConfigExit;
    }

    try {
        if (*run) {
            stc::RunConfig cfg = stc::load_run_config(config_path);
            if (no_fidelity) cfg.fidelity = false;
            if (!format.empty()) cfg.format = stc::parse_report_format(format);
            if (!out_path.empty()) cfg.output_path = out_path;
            const auto report = stc::run_pipeline(cfg);
            if (cfg.output_path) {
                stc::emit_report(report, cfg.format, *cfg.output_path);
            } else {
                std::cout << stc::render_report(report, cfg.format);
            }
        } else if (*gen) {
            const auto stream = stc::generate_stream(sc);
            stc::write_tensor_file(out_path, stream.frames);
        } else if (*red) {
            const stc::RunConfig cfg = stc::load_run_config(config_path);
            cfg.validate(false);
            const auto encoder = stc::init_encoder(cfg.encoder);
            const auto stream = stc::materialize_stream(cfg);
            const auto profile = stc::analyze_redundancy(stream.frames, encoder, stride);
            write_text(stc::to_json(profile).dump(2) + "\n", out_path);
        } else if (*bench) {
            const stc::RunConfig cfg = stc::load_run_config(config_path);
            if (!cfg.cacher) {
                throw stc::ConfigError("bench needs cacher_enabled = true");
            }
            const auto encoder = stc::init_encoder(cfg.encoder);
            const auto stream = stc::materialize_stream(cfg);
            const auto timing = stc::time_stream(encoder, cfg.cacher, stream.frames, repeats);
            const double frames = static_cast<double>(stream.frames.size());
            const double ref = static_cast<double>(stc::flop_count_full(cfg.encoder));
            double cached_flops = 0.0;
            stc::Cacher cacher(encoder, *cfg.cacher);
            for (const auto& f : stream.frames) cached_flops += static_cast<double>(cacher.process_frame(f).stats.flops);

            nlohmann::ordered_json doc;
            doc["frames"] = stream.frames.size();
            doc["repeats"] = repeats;
            doc["vit_wall_time_full_ms"] = timing.full_ms;
            doc["vit_wall_time_selective_ms"] = *timing.selective_ms;
            doc["speedup"] = timing.full_ms / *timing.selective_ms;
            doc["vit_flop_ratio"] = cached_flops / (ref * frames);
            std::cout << doc.dump(2) << "\n";
        }
    } catch (const stc::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigExit;
    } catch (const stc::IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kIoExit;
    } catch (const stc::FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return kIoExit;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
