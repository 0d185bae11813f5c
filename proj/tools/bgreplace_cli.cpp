#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "bgreplace/clip_io.hpp"
#include "bgreplace/fixtures.hpp"
#include "bgreplace/metrics.hpp"
#include "bgreplace/pipeline.hpp"
#include "bgreplace/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace bgreplace;

namespace {

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::kConfig: return 2;
        case ErrorKind::kBackend: return 3;
        case ErrorKind::kIo: return 4;
        case ErrorKind::kInvalidArgument: return 1;
    }
    return 1;
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream os(path);
    if (!os) throw_io("cannot write " + path.string());
    os << j.dump(2) << '\n';
}

json fixture_config(const std::string& name, bool text_mode) {
    json j = {{"input", name + "/input/manifest.json"},
              {"masks", name + "/masks/manifest.json"},
              {"output_dir", "out_" + name + (text_mode ? "_text" : "_image")},
              {"seed", 7}};
    if (text_mode) j["prompt"] = "warm sunset light";
    else j["background_image"] = name + "/background/frame_0000.r32";
    return j;
}

int cmd_run(const std::string& config_path, const std::string& preset) {
    PipelineConfig cfg = load_config(config_path);
    if (!preset.empty()) apply_preset(cfg, preset);
    const PipelineResult r = run_pipeline(cfg);
    json summary = {{"tem_con", r.report["tem_con"]},
                    {"bg_psnr", r.report["bg_psnr"]},
                    {"fg_hf_corr", r.report["fg_hf_corr"]},
                    {"output", r.artifacts.output.string()},
                    {"metrics", r.artifacts.metrics.string()}};
    std::cout << summary.dump(2) << '\n';
    return 0;
}

int cmd_make_fixtures(const fs::path& out, std::uint64_t seed) {
    fs::create_directories(out);
    write_fixture(make_fixture(seed), out / "pan");
    write_fixture(make_static_fixture(seed), out / "static");
    write_json(out / "pan_text.json", fixture_config("pan", true));
    write_json(out / "pan_image.json", fixture_config("pan", false));
    write_json(out / "static_image.json", fixture_config("static", false));
    std::cout << "fixtures written to " << out.string() << '\n';
    return 0;
}

int cmd_metrics(const fs::path& a, const fs::path& b, const fs::path& mask_path, double sigma) {
    const VideoClip out = load_clip(a);
    const VideoClip ref = load_clip(b);
    const MaskClip mask = load_mask(mask_path);
    // shape errors are the caller's; only metrics undefined on the data become null
    require_same_shape(out.pixels(), ref.pixels(), "metrics --a/--b");
    require_mask_matches(mask, out, "metrics --mask");
    BlurSpec blur;
    blur.sigma = sigma;
    json j = json::object();
    const auto guarded = [&](const char* key, auto&& fn) {
        try {
            j[key] = fn();
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::kInvalidArgument) throw;
            j[key] = nullptr;
            std::cerr << "warning: " << key << ": " << e.what() << '\n';
        }
    };
    guarded("tem_con", [&] {
        const MetricSeries s = tem_con_series(out);
        if (s.excluded) std::cerr << "warning: tem_con excluded " << s.excluded << " pair(s) with a blank frame\n";
        return s.value;
    });
    guarded("bg_psnr", [&] { return bg_psnr(out, ref, mask); });
    guarded("fg_hf_corr", [&] { return fg_hf_corr(out, ref, mask, blur); });
    std::cout << j.dump(2) << '\n';
    return 0;
}

int cmd_verify_rpa(const std::string& codec, int trials, std::uint64_t seed, double tolerance) {
    const AlignmentSweep sweep = verify_alignment(codec, trials, seed, tolerance);
    std::cout << sweep.to_json().dump(2) << '\n';
    return sweep.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Latent video diffusion background replacement"};
    app.require_subcommand(1);

    std::string config_path, preset;
    auto* run = app.add_subcommand("run", "run the three-stage pipeline");
    run->add_option("--config", config_path, "pipeline config (JSON)")->required();
    run->add_option("--preset", preset, "SDEdit strengths: strong = (0.7T, 0.7T), weak = (0.4T, 0.4T)")
        ->check(CLI::IsMember({"strong", "weak"}));

    std::string fixture_dir;
    std::uint64_t fixture_seed = 0;
    auto* fixtures = app.add_subcommand("make-fixtures", "write synthetic pan/texture clips, masks and sample configs");
    fixtures->add_option("--out", fixture_dir)->required();
    fixtures->add_option("--seed", fixture_seed);

    std::string a, b, mask;
    double sigma = kDefaultBlurSigma;
    auto* metrics = app.add_subcommand("metrics", "tem_con of A, bg_psnr(A, B) and fg_hf_corr(A, B)");
    metrics->add_option("--a", a, "clip manifest")->required();
    metrics->add_option("--b", b, "reference clip manifest")->required();
    metrics->add_option("--mask", mask, "foreground mask manifest")->required();
    metrics->add_option("--blur-sigma", sigma, "Gaussian sigma for the band split");

    std::string codec = "toy";
    int trials = 1000;
    std::uint64_t verify_seed = 0;
    double tolerance = 1e-6;
    auto* verify = app.add_subcommand("verify-rpa", "randomized sweep of the projection's identity property");
    verify->add_option("--codec", codec)->check(CLI::IsMember({"toy"}));
    verify->add_option("--trials", trials)->check(CLI::PositiveNumber);
    verify->add_option("--seed", verify_seed);
    verify->add_option("--tolerance", tolerance);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*run) return cmd_run(config_path, preset);
        if (*fixtures) return cmd_make_fixtures(fixture_dir, fixture_seed);
        if (*metrics) return cmd_metrics(a, b, mask, sigma);
        if (*verify) return cmd_verify_rpa(codec, trials, verify_seed, tolerance);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
