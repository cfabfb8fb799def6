#include <cstdio>

#include <CLI11.hpp>

#include "ftlab/version.hpp"

int main(int argc, char** argv) {
    CLI::App app{"function-token laboratory"};
    app.set_version_flag("--version", ftlab::kVersion);
    app.require_subcommand(0, 1);
    CLI11_PARSE(app, argc, argv);
    std::puts(app.help().c_str());
    return 0;
}
