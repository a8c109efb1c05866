// rpo: scan seed lists for relative path overwrite, summarize results, run
// mock targets, classify doctypes.

#include "rpo/http_client.hpp"
#include "rpo/mock_server.hpp"
#include "rpo/report.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <pthread.h>

namespace {

int cmd_scan(const std::string& seed_path, const std::string& cookies_path, const std::string& out_path,
    const std::string& profiles_path, rpo::ScanConfig config, const std::vector<std::string>& resolves)
{
    std::vector<rpo::SeedEntry> seeds;
    std::map<std::string, rpo::CookieJar> cookies;
    try {
        std::ifstream in(seed_path);
        if (!in)
            throw rpo::SeedError("cannot read seed file " + seed_path);
        seeds = rpo::parse_seed(in);
        if (!cookies_path.empty()) {
            std::ifstream cin(cookies_path);
            if (!cin)
                throw rpo::SeedError("cannot read cookie file " + cookies_path);
            cookies = rpo::parse_cookie_seed(cin);
        }
    } catch (const rpo::SeedError& e) {
        std::cerr << "rpo scan: " << e.what() << "\n";
        return 2;
    }

    rpo::TransportOptions transport;
    transport.timeout = config.request_timeout;
    transport.user_agent = config.user_agent;
    for (const auto& item : resolves) {
        auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == item.size()) {
            std::cerr << "rpo scan: --resolve expects HOST=ADDR, got '" << item << "'\n";
            return 1;
        }
        auto host = rpo::detail::lowercase(item.substr(0, eq));
        auto addr = item.substr(eq + 1);
        transport.resolve[host] = addr;
        if (addr.rfind("127.", 0) == 0 || addr == "::1")
            config.loopback_hosts.insert(host);
    }
    if (!profiles_path.empty())
        config.profiles = rpo::load_profiles(profiles_path);
    rpo::validate(config);

    std::ofstream file;
    std::ostream* out = &std::cout;
    if (!out_path.empty()) {
        file.open(out_path, std::ios::app);
        if (!file) {
            std::cerr << "rpo scan: cannot open " << out_path << "\n";
            return 1;
        }
        out = &file;
    }

    rpo::HttplibClient transport_client(transport);
    rpo::PoliteClient polite(transport_client, config.per_host_delay);
    rpo::RecordSink sink(rpo::jsonl_writer(*out));
    rpo::run_scan(seeds, cookies, polite, config, sink);
    std::cerr << "rpo scan: " << sink.count() << " records\n";
    return 0;
}

int cmd_summarize(const std::string& in_path, const std::string& format)
{
    std::ifstream in(in_path);
    if (!in) {
        std::cerr << "rpo summarize: cannot read " << in_path << "\n";
        return 1;
    }
    auto table = rpo::summarize(rpo::read_records(in));
    std::cout << (format == "csv" ? rpo::summary_csv(table) : rpo::summary_text(table));
    return 0;
}

int cmd_mock_serve(const std::string& config_path, int port, const std::string& name)
{
    auto targets = rpo::mock::load_targets(config_path);
    const rpo::mock::TargetConfig* chosen = nullptr;
    if (!name.empty()) {
        for (const auto& t : targets) {
            if (t.name == name)
                chosen = &t;
        }
        if (!chosen) {
            std::cerr << "rpo mock serve: no target named '" << name << "'\n";
            return 1;
        }
    } else if (targets.size() == 1) {
        chosen = &targets.front();
    } else {
        std::cerr << "rpo mock serve: " << targets.size() << " targets in file, pick one with --name\n";
        return 1;
    }

    // Block the stop signals before the server threads start so only
    // sigwait below sees them.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    rpo::mock::MockServer server(*chosen, port);
    std::cout << "serving " << chosen->name << " on " << server.origin() << chosen->page_path << std::endl;
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
    return 0;
}

int cmd_doctype(const std::string& doctype, bool from_stdin, const std::string& profile_name, const std::string& profiles_path)
{
    std::optional<std::string> text;
    if (from_stdin) {
        std::string all((std::istreambuf_iterator<char>(std::cin)), std::istreambuf_iterator<char>());
        auto trimmed = rpo::detail::trim(all);
        if (!trimmed.empty())
            text = std::string(trimmed);
    } else if (!doctype.empty()) {
        text = doctype;
    }
    auto profiles = profiles_path.empty() ? rpo::default_profiles() : rpo::load_profiles(profiles_path);
    if (!profile_name.empty()) {
        auto engine = rpo::find_engine(profile_name);
        if (!engine) {
            std::cerr << "rpo doctype classify: unknown profile '" << profile_name << "'\n";
            return 1;
        }
        profiles = { rpo::profile_for(profiles, *engine) };
    }
    for (const auto& p : profiles)
        std::cout << rpo::engine_name(p.engine) << "\t" << rpo::mode_name(rpo::classify_doctype(text, p)) << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app { "Relative path overwrite scanner" };
    app.require_subcommand(1);

    auto* scan = app.add_subcommand("scan", "Scan the pages listed in a seed file");
    std::string seed_path, cookies_path, out_path, profiles_path;
    int padding = rpo::default_slash_padding, delay_ms = 1000, max_hosts = 4, timeout_ms = 10000;
    std::uint64_t seed_rng = 0;
    std::vector<std::string> allow_suffixes, resolves;
    scan->add_option("--seed", seed_path, "Seed file: URL[<TAB>rank[<TAB>doctype]] per line")->required();
    scan->add_option("--cookies", cookies_path, "Cookie file: HOST<TAB>name=value; ... per line");
    scan->add_option("--out", out_path, "Append records here (default stdout)");
    scan->add_option("--profiles", profiles_path, "Browser profile file");
    scan->add_option("--slash-padding", padding, "Slashes appended to mutated paths")->check(CLI::PositiveNumber);
    scan->add_option("--delay", delay_ms, "Per-host delay between requests, ms")->check(CLI::NonNegativeNumber);
    scan->add_option("--max-hosts", max_hosts, "Hosts scanned concurrently")->check(CLI::PositiveNumber);
    scan->add_option("--timeout", timeout_ms, "Request timeout, ms")->check(CLI::PositiveNumber);
    scan->add_option("--seed-rng", seed_rng, "Nonce seed");
    scan->add_option("--allow-suffix", allow_suffixes, "Lift a blocked suffix for loopback hosts (lab use)");
    scan->add_option("--resolve", resolves, "HOST=ADDR, connect to ADDR for HOST");

    auto* summarize = app.add_subcommand("summarize", "Per-technique counts from a record file");
    std::string in_path, format = "table";
    summarize->add_option("--in", in_path, "Record file")->required();
    summarize->add_option("--format", format, "table or csv")->check(CLI::IsMember({ "table", "csv" }));

    auto* mock = app.add_subcommand("mock", "Mock target server");
    mock->require_subcommand(1);
    auto* serve = mock->add_subcommand("serve", "Serve one target configuration on loopback");
    std::string config_path, target_name;
    int port = 0;
    serve->add_option("--config", config_path, "Target configuration file")->required();
    serve->add_option("--port", port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
    serve->add_option("--name", target_name, "Target to serve when the file holds several");

    auto* doctype = app.add_subcommand("doctype", "Doctype tools");
    doctype->require_subcommand(1);
    auto* classify = doctype->add_subcommand("classify", "Rendering mode per browser profile");
    std::string doctype_text, profile_name, classify_profiles;
    bool from_stdin = false;
    auto* dt_opt = classify->add_option("--doctype", doctype_text, "Doctype declaration or public identifier");
    classify->add_flag("--stdin", from_stdin, "Read the doctype from stdin")->excludes(dt_opt);
    classify->add_option("--profile", profile_name, "Only this engine");
    classify->add_option("--profiles", classify_profiles, "Browser profile file");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*scan) {
            rpo::ScanConfig config;
            config.slash_padding = padding;
            config.per_host_delay = std::chrono::milliseconds(delay_ms);
            config.max_concurrent_hosts = max_hosts;
            config.request_timeout = std::chrono::milliseconds(timeout_ms);
            config.seed = seed_rng;
            config.allow_suffixes = allow_suffixes;
            return cmd_scan(seed_path, cookies_path, out_path, profiles_path, config, resolves);
        }
        if (*summarize)
            return cmd_summarize(in_path, format);
        if (*serve)
            return cmd_mock_serve(config_path, port, target_name);
        if (*classify)
            return cmd_doctype(doctype_text, from_stdin, profile_name, classify_profiles);
    } catch (const rpo::Error& e) {
        std::cerr << "rpo: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
