// fbv command-line front end: encode, decode, analyze, rd-sweep.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "fbv.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitFormat = 3;
constexpr int kExitIo = 4;

std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw fbv::IoError("cannot open '" + path + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw fbv::IoError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw fbv::IoError("write to '" + path + "' failed");
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw fbv::IoError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw fbv::IoError("write to '" + path + "' failed");
}

/// Config assembly order: defaults, then --config file, then individual flags.
struct ConfigOptions {
  std::string file;
  std::map<std::string, std::string> overrides;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", file, "key=value configuration file");
    for (const auto& f : fbv::config_fields()) {
      std::string flag = "--" + f.key;
      for (auto& ch : flag)
        if (ch == '_') ch = '-';
      cmd->add_option_function<std::string>(
          flag, [this, key = f.key](const std::string& v) { overrides[key] = v; }, f.help);
    }
  }

  fbv::EncoderConfig build() const {
    fbv::EncoderConfig cfg;
    if (!file.empty()) cfg = fbv::load_config_file(file, cfg);
    // The quality knob is applied before an explicit step so --fg-delta wins.
    if (auto q = overrides.find("quality"); q != overrides.end()) fbv::set_config_value(cfg, q->first, q->second);
    for (const auto& [k, v] : overrides)
      if (k != "quality") fbv::set_config_value(cfg, k, v);
    fbv::validate(cfg);
    return cfg;
  }
};

std::vector<double> parse_qualities(const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw fbv::ConfigError("bad quality value '" + item + "'");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fbv: foreground/background surveillance video codec"};
  app.require_subcommand(1);

  auto* enc = app.add_subcommand("encode", "encode a Y4M video");
  std::string enc_in, enc_out, enc_report, enc_json;
  bool enc_timing = false;
  ConfigOptions enc_cfg;
  enc->add_option("-i,--input", enc_in, "input .y4m")->required();
  enc->add_option("-o,--output", enc_out, "output .fbv")->required();
  enc->add_option("--report", enc_report, "per-frame quality CSV");
  enc->add_option("--json", enc_json, "JSON summary (quality, bit budget, timing)");
  enc->add_flag("--timing", enc_timing, "print the per-stage timing report");
  enc_cfg.attach(enc);

  auto* dec = app.add_subcommand("decode", "decode an .fbv stream");
  std::string dec_in, dec_out, dec_ref, dec_report;
  bool no_enhance = false;
  int feather = 3;
  dec->add_option("-i,--input", dec_in, "input .fbv")->required();
  dec->add_option("-o,--output", dec_out, "output .y4m")->required();
  dec->add_option("--reference", dec_ref, "original .y4m for quality measurement");
  dec->add_option("--report", dec_report, "per-frame quality CSV (needs --reference)");
  dec->add_flag("--no-enhance", no_enhance, "skip boundary feathering");
  dec->add_option("--feather-width", feather, "boundary feather width")->check(CLI::Range(0, 16));

  auto* ana = app.add_subcommand("analyze", "dump stream structure and bit allocation");
  std::string ana_in;
  bool ana_json = false;
  ana->add_option("-i,--input", ana_in, "input .fbv")->required();
  ana->add_flag("--json", ana_json, "print a JSON summary instead of the text dump");

  auto* rd = app.add_subcommand("rd-sweep", "encode at several quality points and report rate/distortion");
  std::string rd_in, rd_qualities, rd_csv, rd_json_path;
  ConfigOptions rd_cfg;
  rd->add_option("-i,--input", rd_in, "input .y4m")->required();
  rd->add_option("--qualities", rd_qualities, "comma-separated quality values")->required();
  rd->add_option("--csv", rd_csv, "write CSV here instead of stdout");
  rd->add_option("--plot-data", rd_json_path, "JSON summary for plotting");
  rd_cfg.attach(rd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*enc) {
      const auto cfg = enc_cfg.build();
      const auto video = fbv::read_video_file(enc_in);
      const auto r = fbv::encode(video, cfg);
      write_bytes(enc_out, r.bytes);
      std::printf("%zu frames, %zu bytes, %.6f bpp, PSNR %.3f dB, MS-SSIM %.5f, templates %zu, foreground frames %zu\n",
                  video.frames.size(), r.bytes.size(), r.quality.bpp, r.quality.mean_psnr, r.quality.mean_ms_ssim,
                  r.stream.templates.size(), r.stream.foregrounds.size());
      if (enc_timing) fbv::print_timing(std::cout, r.timing);
      if (!enc_report.empty()) {
        std::ostringstream os;
        fbv::write_quality_csv(os, r.quality);
        write_text(enc_report, os.str());
      }
      if (!enc_json.empty()) {
        nlohmann::json j{{"quality", fbv::to_json(r.quality)},
                         {"bits", fbv::to_json(r.bits)},
                         {"timing", fbv::to_json(r.timing)},
                         {"config", fbv::config_to_text(cfg)}};
        write_text(enc_json, j.dump(2) + "\n");
      }
    } else if (*dec) {
      if (!dec_report.empty() && dec_ref.empty()) throw fbv::ConfigError("--report needs --reference");
      const auto bytes = read_bytes(dec_in);
      const auto r = fbv::decode(bytes, {!no_enhance, feather});
      fbv::write_video_file(dec_out, r.video);
      std::printf("decoded %zu frames\n", r.video.frames.size());
      if (!dec_ref.empty()) {
        const auto ref = fbv::read_video_file(dec_ref);
        if (ref.frames.size() != r.video.frames.size() || ref.width() != r.video.width() ||
            ref.height() != r.video.height())
          throw fbv::ConfigError("reference video does not match the decoded geometry");
        const auto q = fbv::measure_quality(ref.frames, r.video.frames, r.recon.foregrounds, r.recon.masks,
                                            bytes.size(), fbv::stream_bit_cost(r.stream));
        std::printf("PSNR %.3f dB, MS-SSIM %.5f, bpp %.6f, FB-mixture %.5f\n", q.mean_psnr, q.mean_ms_ssim, q.bpp,
                    q.fb_mixture);
        if (!dec_report.empty()) {
          std::ostringstream os;
          fbv::write_quality_csv(os, q);
          write_text(dec_report, os.str());
        }
      }
    } else if (*ana) {
      const auto report = fbv::analyze(read_bytes(ana_in));
      if (ana_json) {
        nlohmann::json j{{"frames", report.stream.header.frame_count},
                         {"templates", report.stream.templates.size()},
                         {"foreground_records", report.stream.foregrounds.size()},
                         {"segments", report.layout.segments.size()},
                         {"bytes", report.layout.total_bytes},
                         {"bpp", report.bpp},
                         {"bits", fbv::to_json(report.bits)}};
        std::cout << j.dump(2) << "\n";
      } else {
        fbv::print_analysis(std::cout, report);
      }
    } else if (*rd) {
      const auto cfg = rd_cfg.build();
      const auto video = fbv::read_video_file(rd_in);
      const auto qs = parse_qualities(rd_qualities);
      const auto points = fbv::rd_sweep(video, qs, cfg);
      std::ostringstream os;
      fbv::write_rd_csv(os, points);
      if (rd_csv.empty()) std::cout << os.str();
      else write_text(rd_csv, os.str());
      if (!rd_json_path.empty()) write_text(rd_json_path, fbv::rd_json(points).dump(2) + "\n");
    }
  } catch (const fbv::ConfigError& e) {
    std::fprintf(stderr, "fbv: %s\n", e.what());
    return kExitUsage;
  } catch (const fbv::FormatError& e) {
    std::fprintf(stderr, "fbv: format error: %s\n", e.what());
    return kExitFormat;
  } catch (const fbv::IoError& e) {
    std::fprintf(stderr, "fbv: %s\n", e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "fbv: %s\n", e.what());
    return 1;
  }
  return 0;
}
