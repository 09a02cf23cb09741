#include "pearl/frontdoor/cli.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <iostream>

int main(int argc, char** argv) {
    // Keep stdout for results; diagnostics go to stderr.
    spdlog::set_default_logger(spdlog::stderr_color_mt("pearl"));
    const std::vector<std::string> args(argv + 1, argv + argc);
    return pearl::frontdoor::run_cli(args, std::cout, std::cerr);
}
