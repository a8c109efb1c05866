// Runs the built rpo binary.

#include "rpo/http_client.hpp"
#include "rpo/mock_server.hpp"
#include "rpo/report.hpp"
#include "support/testing.hpp"

#include <gtest/gtest.h>

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

extern char** environ;

using namespace rpo;
namespace fs = std::filesystem;

namespace {

struct Run {
    int status = -1;
    std::string out;
};

std::string quote(const std::string& s)
{
    std::string out = "'";
    for (char c : s)
        out += c == '\'' ? std::string("'\\''") : std::string(1, c);
    return out + "'";
}

Run rpo_cli(const std::vector<std::string>& args, const std::string& stdin_text = "")
{
    std::string cmd = quote(RPO_CLI_PATH);
    for (const auto& a : args)
        cmd += " " + quote(a);
    if (!stdin_text.empty())
        cmd = "printf '%s' " + quote(stdin_text) + " | " + cmd;
    else
        cmd += " </dev/null";
    cmd += " 2>/dev/null";
    Run r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe)
        return r;
    char buf[4096];
    while (auto n = fread(buf, 1, sizeof(buf), pipe))
        r.out.append(buf, n);
    int status = pclose(pipe);
    r.status = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

class TempDir {
public:
    TempDir()
    {
        std::string tmpl = (fs::temp_directory_path() / "rpo-cli-XXXXXX").string();
        m_path = mkdtemp(tmpl.data());
    }
    ~TempDir() { fs::remove_all(m_path); }
    fs::path operator/(const std::string& name) const { return m_path / name; }

private:
    fs::path m_path;
};

void write_file(const fs::path& p, const std::string& text)
{
    std::ofstream(p) << text;
}

int free_port()
{
    mock::MockServer probe(mock::TargetConfig {});
    return probe.port();
}

} // namespace

TEST(Cli, DoctypeClassify)
{
    auto r = rpo_cli({ "doctype", "classify", "--doctype", "<!DOCTYPE html>" });
    EXPECT_EQ(r.status, 0);
    EXPECT_EQ(r.out, "Chrome\tStandards\nOpera\tStandards\nSafari\tStandards\nFirefox\tStandards\nEdge\tStandards\nInternetExplorer\tStandards\n");

    r = rpo_cli({ "doctype", "classify", "--profile", "Firefox" });
    EXPECT_EQ(r.out, "Firefox\tQuirks\n");

    r = rpo_cli({ "doctype", "classify", "--stdin", "--profile", "Chrome" }, "<!DOCTYPE HTML PUBLIC \"-//W3C//DTD HTML 4.01 Transitional//EN\">\n");
    EXPECT_EQ(r.out, "Chrome\tQuirks\n");

    r = rpo_cli({ "doctype", "classify", "--profiles", RPO_PROFILE_FILE, "--doctype", "<!DOCTYPE html>", "--profile", "Edge" });
    EXPECT_EQ(r.status, 0);
    EXPECT_EQ(r.out, "Edge\tStandards\n");

    EXPECT_NE(rpo_cli({ "doctype", "classify", "--profile", "Lynx" }).status, 0);
}

TEST(Cli, SeedErrorsExitTwo)
{
    TempDir dir;
    write_file(dir / "seed.txt", "http://a.com/\nnot-a-url\n");
    EXPECT_EQ(rpo_cli({ "scan", "--seed", (dir / "seed.txt").string() }).status, 2);
    EXPECT_EQ(rpo_cli({ "scan", "--seed", (dir / "missing.txt").string() }).status, 2);
    EXPECT_NE(rpo_cli({ "scan" }).status, 0);
    EXPECT_NE(rpo_cli({ "scan", "--seed", (dir / "seed.txt").string(), "--slash-padding", "0" }).status, 0);
}

TEST(Cli, ScanAgainstLoopbackThenSummarize)
{
    auto server = mock::serve(mock::load_targets(rpo::testing::fixture_path("mock/pathinfo_url_quirks.json")).at(0));
    auto port = std::to_string(server->port());
    TempDir dir;
    write_file(dir / "seed.txt", "http://victim.test:" + port + "/rpo/page.php\t1\nhttp://agency.gov:" + port + "/rpo/page.php\t2\n");
    auto records_path = (dir / "records.jsonl").string();
    auto r = rpo_cli({ "scan", "--seed", (dir / "seed.txt").string(), "--out", records_path, "--delay", "0", "--resolve",
        "victim.test=127.0.0.1", "--resolve", "agency.gov=127.0.0.1" });
    ASSERT_EQ(r.status, 0);

    std::ifstream in(records_path);
    auto records = read_records(in);
    ASSERT_EQ(records.size(), 2u);
    for (const auto& rec : records) {
        if (rec.site == "agency.gov") {
            EXPECT_EQ(rec.status, RecordStatus::NotScanned);
            EXPECT_EQ(*rec.reason, "EthicsBlocked");
        } else {
            EXPECT_EQ(rec.status, RecordStatus::Exploitable);
            EXPECT_EQ(*rec.technique, "PathParamSimple");
            EXPECT_EQ(*rec.rank, 1);
        }
    }

    auto csv = rpo_cli({ "summarize", "--in", records_path, "--format", "csv" });
    EXPECT_EQ(csv.status, 0);
    EXPECT_EQ(csv.out.rfind("technique,vulnerable_pages,vulnerable_sites,", 0), 0u);
    EXPECT_NE(csv.out.find("\nTotal,1,1,1,1,1,1,1,1,1,1,1,1,1,1\n"), std::string::npos) << csv.out;
    auto table = rpo_cli({ "summarize", "--in", records_path });
    EXPECT_NE(table.out.find("candidate set: 1 pages, 1 sites"), std::string::npos) << table.out;
    EXPECT_NE(rpo_cli({ "summarize", "--in", (dir / "nope").string() }).status, 0);
}

TEST(Cli, MockServeUntilSignal)
{
    auto port = free_port();
    int out[2];
    ASSERT_EQ(pipe(out), 0);
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, out[1], STDOUT_FILENO);
    posix_spawn_file_actions_addclose(&actions, out[0]);
    std::string config = rpo::testing::fixture_path("mock/matrix.json");
    std::vector<std::string> args = { RPO_CLI_PATH, "mock", "serve", "--config", config, "--name", "decode-url-quirks", "--port", std::to_string(port) };
    std::vector<char*> argv;
    for (auto& a : args)
        argv.push_back(a.data());
    argv.push_back(nullptr);
    pid_t pid = 0;
    ASSERT_EQ(posix_spawn(&pid, RPO_CLI_PATH, &actions, nullptr, argv.data(), environ), 0);
    posix_spawn_file_actions_destroy(&actions);
    close(out[1]);

    // the first line says where it listens
    std::string line;
    char c = 0;
    while (read(out[0], &c, 1) == 1 && c != '\n')
        line += c;
    close(out[0]);
    EXPECT_EQ(line, "serving decode-url-quirks on http://127.0.0.1:" + std::to_string(port) + "/dir/page.aspx");

    HttplibClient client;
    HttpRequest req;
    req.url = parse_url("http://127.0.0.1:" + std::to_string(port) + "/x%2F..%2Fdir/page.aspx");
    EXPECT_EQ(client.get(req).status, 200);

    kill(pid, SIGTERM);
    int status = 0;
    waitpid(pid, &status, 0);
    EXPECT_TRUE(WIFEXITED(status));
    EXPECT_EQ(WEXITSTATUS(status), 0);
    EXPECT_THROW(client.get(req), NetworkError);
}

TEST(Cli, MockServeNeedsName)
{
    EXPECT_NE(rpo_cli({ "mock", "serve", "--config", rpo::testing::fixture_path("mock/matrix.json") }).status, 0);
    EXPECT_NE(rpo_cli({ "mock", "serve", "--config", rpo::testing::fixture_path("mock/matrix.json"), "--name", "nope" }).status, 0);
}
