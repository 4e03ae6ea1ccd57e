#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "ctricks/error.hpp"
#include "ctricks/harness.hpp"

using namespace ctricks;
namespace h = ctricks::harness;

namespace {

struct Flags {
    std::string cases = "all";
    int n = 100;
    int demo_n = 10;
    std::uint64_t seed = 0;
    int image_size = 448;
    int patch_size = 28;
    double k_percent = 10.0;
    double tau = 0.4;
    double lambda = 0.1;
    int epochs = 10;
    std::string conflict_deltas;
    std::string out;
    std::string responses;
    std::string attn;
    std::string dataset;
    std::vector<std::int64_t> c_in{1024, 2048};
};

h::RunConfig to_config(const std::string& command, const Flags& f) {
    h::RunConfig c;
    c.command = command;
    c.cases = h::parse_case_list(f.cases);
    c.n_per_case = f.n;
    c.seed = f.seed;
    c.grid = {f.image_size, f.patch_size};
    c.k_percent = f.k_percent;
    c.tau = f.tau;
    c.lambda = f.lambda;
    c.epochs = f.epochs;
    c.conflict_deltas = h::parse_int_list(f.conflict_deltas);
    c.out = f.out;
    c.responses = f.responses;
    c.attn = f.attn;
    c.dataset = f.dataset;
    c.validate();
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Counting-scene generation, scoring and MAS toy training"};
    app.require_subcommand(1);
    Flags f;

    auto* gen = app.add_subcommand("generate", "render a synthetic counting dataset");
    gen->add_option("--cases", f.cases, "comma-separated case codes or 'all'");
    gen->add_option("--n", f.n, "samples per case");
    gen->add_option("--seed", f.seed, "base seed");
    gen->add_option("--image-size", f.image_size);
    gen->add_option("--patch-size", f.patch_size);
    gen->add_option("--conflict-deltas", f.conflict_deltas, "e.g. -2,-1,1,2");
    gen->add_option("--out", f.out, "output directory")->required();

    auto* ev = app.add_subcommand("evaluate", "score model responses against a dataset");
    ev->add_option("--dataset", f.dataset)->required();
    ev->add_option("--responses", f.responses, "JSONL with sample_id, variant, raw_text")->required();
    ev->add_option("--attn", f.attn, "JSONL of per-sample attention grids or record headers");
    ev->add_option("--k-percent", f.k_percent);
    ev->add_option("--out", f.out, "report path");

    auto* demo = app.add_subcommand("mas-demo", "train the toy model with and without the MAS penalty");
    demo->add_option("--dataset", f.dataset, "use scenes from a generated dataset");
    demo->add_option("--cases", f.cases);
    demo->add_option("--n", f.demo_n, "scenes per case (default 10)");
    demo->add_option("--seed", f.seed);
    demo->add_option("--tau", f.tau);
    demo->add_option("--lambda", f.lambda);
    demo->add_option("--epochs", f.epochs);
    demo->add_option("--out", f.out);

    auto* probe = app.add_subcommand("probe-params", "parameter counts of the detection probe");
    probe->add_option("--c-in", f.c_in, "input channel widths");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : h::kExitInvalidInput;
    }

    try {
        if (*gen) {
            const auto s = h::cmd_generate(to_config("generate", f));
            std::cout << "wrote " << s.written << " samples, skipped " << s.skipped.size() << "\n";
            for (const auto& sk : s.skipped) std::cerr << "skipped " << sk.id << ": " << sk.reason << "\n";
            return s.skipped.empty() ? h::kExitOk : h::kExitPartial;
        }
        if (*ev) {
            const auto r = h::cmd_evaluate(to_config("evaluate", f));
            if (f.out.empty()) std::cout << r.report.dump(2) << "\n";
            else std::cout << "overall accuracy " << r.report["overall_accuracy"].get<double>() << "\n";
            if (r.exit_code == h::kExitPartial) {
                std::cerr << "partial coverage: " << r.report["unmatched"].size() << " unmatched responses, "
                          << r.report["unanswered_samples"].get<std::size_t>() << " unanswered samples\n";
            }
            return r.exit_code;
        }
        if (*demo) {
            f.n = f.demo_n;
            const auto r = h::cmd_mas_demo(to_config("mas-demo", f));
            std::cout << r.summary.dump(2) << "\n";
            return h::kExitOk;
        }
        if (*probe) {
            for (auto c : f.c_in) {
                if (c <= 0) throw Error(ErrorKind::InvalidArgument, "--c-in must be positive");
            }
            std::cout << h::probe_table(h::cmd_probe_params(f.c_in));
            return h::kExitOk;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.kind() == ErrorKind::Io ? 1 : h::kExitInvalidInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return h::kExitOk;
}
