#ifndef WDN_CLI_HPP
#define WDN_CLI_HPP

#include <string>
#include <vector>

#include "json.hpp"

#include "wdn/wdn_model.hpp"

namespace wdn::cli {

inline constexpr const char* tool_version = "0.1.0";

enum ExitCode : int {
    exit_ok = 0,
    exit_failure = 1,
    exit_usage = 2,
    exit_data = 3,
    exit_numerical = 4,
};

TrainConfig train_config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const TrainConfig& config);

/// Run the command line; `args` excludes the program name. Never throws.
int run(const std::vector<std::string>& args);

}

#endif
