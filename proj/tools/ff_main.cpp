#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ff/emulator.hpp"
#include "ff/error.hpp"
#include "ff/faulter.hpp"
#include "ff/patcher.hpp"
#include "ff/pipeline.hpp"
#include "ff/program.hpp"

namespace {

using ff::Errc;
using ff::Error;
using ff::ordered_json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::BadOperand, "cannot open file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::BadOperand, "cannot write file '" + path + "'");
  out << data;
  out.flush();
  if (!out) throw Error(Errc::BadOperand, "failed writing file '" + path + "'");
}

bool looks_like_image(const std::string& data) {
  return data.size() >= 4 && data.compare(0, 4, "FI32") == 0;
}

// Program arguments accept either assembly text or a binary image; the
// container magic decides.
ff::ProgramImage load_program(const std::string& path) {
  const std::string data = read_file(path);
  if (looks_like_image(data)) {
    return ff::image_from_bytes(std::vector<uint8_t>(data.begin(), data.end()));
  }
  return ff::assemble_text(data);
}

ff::AsmUnit load_unit(const std::string& path) {
  const std::string data = read_file(path);
  if (looks_like_image(data)) {
    return ff::disassemble(ff::image_from_bytes(std::vector<uint8_t>(data.begin(), data.end())));
  }
  return ff::parse_asm(data);
}

std::vector<uint32_t> parse_words(const std::string& csv) {
  std::vector<uint32_t> words;
  if (csv.empty()) return words;
  size_t pos = 0;
  while (pos <= csv.size()) {
    size_t comma = csv.find(',', pos);
    if (comma == std::string::npos) comma = csv.size();
    std::string tok = csv.substr(pos, comma - pos);
    const size_t b = tok.find_first_not_of(" \t");
    const size_t e = tok.find_last_not_of(" \t");
    tok = (b == std::string::npos) ? std::string() : tok.substr(b, e - b + 1);
    if (tok.empty()) throw Error(Errc::BadOperand, "empty word in input list '" + csv + "'");
    try {
      size_t used = 0;
      const unsigned long v = std::stoul(tok, &used, 0);
      if (used != tok.size() || v > 0xFFFFFFFFul) throw std::invalid_argument(tok);
      words.push_back(uint32_t(v));
    } catch (const std::exception&) {
      throw Error(Errc::BadOperand, "bad word '" + tok + "' in input list");
    }
    if (comma == csv.size()) break;
    pos = comma + 1;
  }
  return words;
}

ff::FaultModel parse_model(const std::string& name) {
  if (name == "skip") return ff::FaultModel::InstructionSkip;
  if (name == "bitflip") return ff::FaultModel::SingleBitFlip;
  throw Error(Errc::BadOperand, "unknown fault model '" + name + "' (skip|bitflip)");
}

unsigned resolve_workers(unsigned flag_value) {
  if (const char* env = std::getenv("FF_WORKERS")) {
    try {
      size_t used = 0;
      const unsigned long v = std::stoul(env, &used, 10);
      if (used == 0 || env[used] != '\0') throw std::invalid_argument(env);
      return unsigned(v);
    } catch (const std::exception&) {
      throw Error(Errc::BadOperand, "FF_WORKERS must be a non-negative integer");
    }
  }
  return flag_value;
}

void emit_report(const ordered_json& j, const std::string& path) {
  std::string text = j.dump(2);
  text += '\n';
  if (path.empty()) {
    std::cout << text;
  } else {
    write_file(path, text);
  }
}

void check_inputs(const std::vector<uint32_t>& good, const std::vector<uint32_t>& bad) {
  if (good.empty() || bad.empty()) {
    throw Error(Errc::BadOperand, "--good and --bad input lists must be non-empty");
  }
  if (good == bad) {
    throw Error(Errc::BadOperand, "--good and --bad input lists must differ");
  }
}

std::string summarize(const ordered_json& j) {
  std::ostringstream s;
  if (j.contains("per_iteration")) {
    s << "harden report (" << j.value("model", "?") << " model)\n";
    s << "  observables: good=" << j["good_observable"] << " bad=" << j["bad_observable"] << "\n";
    s << "  iterations: " << j["iterations"] << ", converged: " << j["converged"] << "\n";
    s << "  successes: " << j["initial_successes"] << " -> " << j["final_successes"] << "\n";
    for (const auto& it : j["per_iteration"]) {
      s << "    campaign: " << it["successes"] << " successes, " << it["patches"]
        << " patches\n";
    }
    s << "  residual: " << j["residual"].size() << "\n";
    const auto& ov = j["overhead"];
    s << "  overhead: " << ov["original_size"] << " -> " << ov["hardened_size"] << " words ("
      << ov["overhead_pct"] << "%)\n";
  } else if (j.value("method", "") == "hybrid") {
    s << "hybrid report (" << j.value("model", "?") << " model)\n";
    const auto& ov = j["overhead"];
    s << "  overhead: " << ov["original_size"] << " -> " << ov["hardened_size"] << " words ("
      << ov["overhead_pct"] << "%)\n";
    s << "  hardened branches: " << j["fragments"].size() << "\n";
    s << "  protected-branch successes: " << j["protected_branch_successes"] << "\n";
    s << "  verification successes: " << j["verification"]["success_count"] << "\n";
  } else if (j.contains("outcomes")) {
    s << "campaign report (" << j.value("model", "?") << " model)\n";
    s << "  observables: good=" << j["good_observable"] << " bad=" << j["bad_observable"] << "\n";
    s << "  trace length: " << j["trace_length"] << ", runs: " << j["campaign_runs"] << "\n";
    s << "  successes: " << j["success_count"] << "\n";
    for (const auto& o : j["outcomes"]) {
      if (o["classification"] == "success") {
        s << "    offset " << o["trace_offset"];
        if (o.contains("bit")) s << " bit " << o["bit"];
        s << " @ pc " << o["pc"] << ": " << o["disasm"].get<std::string>() << "\n";
      }
    }
  } else {
    throw Error(Errc::BadOperand, "unrecognized report shape");
  }
  return s.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FI32 fault-injection analysis and hardening toolchain"};
  app.require_subcommand(1);

  std::string in_path, out_path, out_asm_path, report_path, input_csv, good_csv, bad_csv;
  std::string model_name = "skip";
  unsigned workers = 0;
  uint32_t max_iters = ff::kDefaultMaxIters;
  uint32_t max_steps = ff::kDefaultMaxSteps;

  auto* cmd_assemble = app.add_subcommand("assemble", "Assemble source text to a binary image");
  cmd_assemble->add_option("src", in_path, "assembly source file")->required();
  cmd_assemble->add_option("-o,--out", out_path, "output image path")->required();

  auto* cmd_run = app.add_subcommand("run", "Execute a program and print the run result");
  cmd_run->add_option("program", in_path, "image or assembly file")->required();
  cmd_run->add_option("--input", input_csv, "comma-separated input words (default: empty)");
  cmd_run->add_option("--max-steps", max_steps, "step budget (default 100000)");

  auto* cmd_fault = app.add_subcommand("fault", "Run an exhaustive single-fault campaign");
  cmd_fault->add_option("program", in_path, "image or assembly file")->required();
  cmd_fault->add_option("--model", model_name, "fault model: skip|bitflip (default skip)");
  cmd_fault->add_option("--good", good_csv, "accepted input words")->required();
  cmd_fault->add_option("--bad", bad_csv, "rejected input words")->required();
  cmd_fault->add_option("--workers", workers, "worker threads, 0 = hardware (default 0)");
  cmd_fault->add_option("--max-steps", max_steps, "step budget per run (default 100000)");
  cmd_fault->add_option("--report", report_path, "report path (default: stdout)");

  auto* cmd_harden = app.add_subcommand("harden", "Iteratively patch until no fault succeeds");
  cmd_harden->add_option("program", in_path, "image or assembly file")->required();
  cmd_harden->add_option("--model", model_name, "fault model: skip|bitflip (default skip)");
  cmd_harden->add_option("--good", good_csv, "accepted input words")->required();
  cmd_harden->add_option("--bad", bad_csv, "rejected input words")->required();
  cmd_harden->add_option("--max-iters", max_iters, "campaign limit (default 10)");
  cmd_harden->add_option("--workers", workers, "worker threads, 0 = hardware (default 0)");
  cmd_harden->add_option("--max-steps", max_steps, "step budget per run (default 100000)");
  cmd_harden->add_option("-o,--out", out_path, "write the hardened image here");
  cmd_harden->add_option("--out-asm", out_asm_path, "write the hardened assembly here");
  cmd_harden->add_option("--report", report_path, "report path (default: stdout)");

  auto* cmd_hybrid = app.add_subcommand("hybrid", "Harden conditional branches via the IR pass");
  cmd_hybrid->add_option("program", in_path, "image or assembly file")->required();
  cmd_hybrid->add_option("--model", model_name, "verification fault model (default skip)");
  cmd_hybrid->add_option("--good", good_csv, "accepted input words")->required();
  cmd_hybrid->add_option("--bad", bad_csv, "rejected input words")->required();
  cmd_hybrid->add_option("--workers", workers, "worker threads, 0 = hardware (default 0)");
  cmd_hybrid->add_option("--max-steps", max_steps, "step budget per run (default 100000)");
  cmd_hybrid->add_option("-o,--out", out_path, "write the hardened image here");
  cmd_hybrid->add_option("--out-asm", out_asm_path, "write the hardened assembly here");
  cmd_hybrid->add_option("--report", report_path, "report path (default: stdout)");

  auto* cmd_report = app.add_subcommand("report", "Summarize a JSON report for humans");
  cmd_report->add_option("json", in_path, "report file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (max_steps == 0) throw Error(Errc::BadOperand, "--max-steps must be positive");
    ff::Limits limits;
    limits.max_steps = max_steps;

    if (app.got_subcommand(cmd_assemble)) {
      ff::save_image(ff::assemble_text(read_file(in_path)), out_path);
      return 0;
    }

    if (app.got_subcommand(cmd_run)) {
      const ff::ProgramImage img = load_program(in_path);
      const std::vector<uint32_t> input = parse_words(input_csv.empty() ? "" : input_csv);
      emit_report(ff::run_to_json(ff::run(img, input, limits)), "");
      return 0;
    }

    if (app.got_subcommand(cmd_fault)) {
      const ff::ProgramImage img = load_program(in_path);
      const auto good = parse_words(good_csv), bad = parse_words(bad_csv);
      check_inputs(good, bad);
      const ff::VulnerabilityReport rep =
          ff::campaign(img, good, bad, parse_model(model_name), limits, resolve_workers(workers));
      emit_report(ff::campaign_to_json(rep), report_path);
      return 0;
    }

    if (app.got_subcommand(cmd_harden)) {
      const ff::ProgramImage img = load_program(in_path);
      const auto good = parse_words(good_csv), bad = parse_words(bad_csv);
      check_inputs(good, bad);
      if (max_iters == 0) throw Error(Errc::BadOperand, "--max-iters must be positive");
      const ff::HardenResult hr =
          ff::harden_iterate(img, good, bad, parse_model(model_name), max_iters, limits,
                             resolve_workers(workers));
      const ff::OverheadReport ov =
          ff::overhead(img, hr.final_image, ff::Method::FaulterPatcher);
      if (!out_path.empty()) ff::save_image(hr.final_image, out_path);
      if (!out_asm_path.empty()) {
        write_file(out_asm_path, ff::render_asm(ff::disassemble(hr.final_image)));
      }
      emit_report(ff::harden_to_json(hr, ov), report_path);
      return (hr.converged && hr.residual.empty()) ? 0 : 1;
    }

    if (app.got_subcommand(cmd_hybrid)) {
      const ff::AsmUnit unit = load_unit(in_path);
      const auto good = parse_words(good_csv), bad = parse_words(bad_csv);
      check_inputs(good, bad);
      const ff::HybridResult hy = ff::run_hybrid_pipeline(
          unit, good, bad, parse_model(model_name), limits, resolve_workers(workers));
      if (!out_path.empty()) ff::save_image(hy.image, out_path);
      if (!out_asm_path.empty()) write_file(out_asm_path, ff::render_asm(hy.lowered.unit));
      emit_report(ff::hybrid_to_json(hy), report_path);
      return hy.protected_branch_successes == 0 ? 0 : 1;
    }

    if (app.got_subcommand(cmd_report)) {
      ordered_json j;
      try {
        j = ordered_json::parse(read_file(in_path));
      } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::BadOperand, std::string("invalid report JSON: ") + e.what());
      }
      std::cout << summarize(j);
      return 0;
    }
  } catch (const Error& e) {
    emit_report(ff::error_to_json(e), "");
    return 2;
  } catch (const std::exception& e) {
    ordered_json j;
    j["error"] = "Internal";
    j["message"] = e.what();
    emit_report(j, "");
    return 2;
  }
  return 0;
}
