#pragma once

// Named hyperparameter presets. The mnist-/cifar-/higgs-/rnn- groups carry
// the winning values from the published grid/Bayesian searches verbatim; they
// configure model and optimizer only, so the caller still picks the dataset
// source. The digits- group is a self-contained desk-scale battery on the
// procedural digit corpus, sized to finish in minutes on one core.
//
// Resolution order: preset values first, explicit config keys override.

#include <string>
#include <utility>
#include <vector>

#include "common.hpp"
#include "config.hpp"

namespace altmin {

namespace detail {

using PresetPairs = std::vector<std::pair<const char*, const char*>>;

struct Preset {
    const char* name;
    PresetPairs pairs;
};

inline const std::vector<Preset>& preset_table() {
    // Shared fragments, spelled out per preset to keep each row readable.
    static const std::vector<Preset> table = {
        // Fully connected, 2x100 / 2x500 hidden, minibatch 200, 50 epochs.
        {"mnist-mlp-100-adam",
         {{"model", "mlp"}, {"hidden_units", "[100, 100]"}, {"hidden_activation", "relu"},
          {"algo", "adam"}, {"lr", "0.0210"}, {"batch", "200"}, {"epochs", "50"}}},
        {"mnist-mlp-500-adam",
         {{"model", "mlp"}, {"hidden_units", "[500, 500]"}, {"hidden_activation", "relu"},
          {"algo", "adam"}, {"lr", "0.0005"}, {"batch", "200"}, {"epochs", "50"}}},
        {"mnist-mlp-100-sgd",
         {{"model", "mlp"}, {"hidden_units", "[100, 100]"}, {"hidden_activation", "relu"},
          {"algo", "sgd"}, {"lr", "0.2030"}, {"sgd_decay", "0.9"}, {"batch", "200"},
          {"epochs", "50"}}},
        {"mnist-mlp-500-sgd",
         {{"model", "mlp"}, {"hidden_units", "[500, 500]"}, {"hidden_activation", "relu"},
          {"algo", "sgd"}, {"lr", "0.1497"}, {"sgd_decay", "0.9"}, {"batch", "200"},
          {"epochs", "50"}}},
        {"mnist-mlp-100-am-adam",
         {{"model", "mlp"}, {"hidden_units", "[100, 100]"}, {"hidden_activation", "relu"},
          {"algo", "am-adam"}, {"lr", "0.1973"}, {"code_lr", "0.5"}, {"code_iters", "1"},
          {"weight_iters", "1"}, {"mu0", "0.01"}, {"mu_increment", "1e-5"},
          {"mu_multiplier", "1.1"}, {"mu_max", "1.5"}, {"batch", "200"}, {"epochs", "50"}}},
        {"mnist-mlp-500-am-adam",
         {{"model", "mlp"}, {"hidden_units", "[500, 500]"}, {"hidden_activation", "relu"},
          {"algo", "am-adam"}, {"lr", "0.1171"}, {"code_lr", "0.5"}, {"code_iters", "1"},
          {"weight_iters", "1"}, {"mu0", "0.01"}, {"mu_increment", "1e-5"},
          {"mu_multiplier", "1.1"}, {"mu_max", "1.5"}, {"batch", "200"}, {"epochs", "50"}}},
        {"mnist-mlp-100-am-mem",
         {{"model", "mlp"}, {"hidden_units", "[100, 100]"}, {"hidden_activation", "relu"},
          {"algo", "am-mem"}, {"lr", "0.1737"}, {"code_lr", "0.5"}, {"code_iters", "1"},
          {"weight_iters", "1"}, {"mu0", "0.01"}, {"mu_increment", "1e-5"},
          {"mu_multiplier", "1.1"}, {"mu_max", "1.5"}, {"batch", "200"}, {"epochs", "50"}}},
        {"mnist-mlp-500-am-mem",
         {{"model", "mlp"}, {"hidden_units", "[500, 500]"}, {"hidden_activation", "relu"},
          {"algo", "am-mem"}, {"lr", "0.1376"}, {"code_lr", "0.5"}, {"code_iters", "1"},
          {"weight_iters", "1"}, {"mu0", "0.01"}, {"mu_increment", "1e-5"},
          {"mu_multiplier", "1.1"}, {"mu_max", "1.5"}, {"batch", "200"}, {"epochs", "50"}}},

        {"cifar-mlp-100-adam",
         {{"model", "mlp"}, {"hidden_units", "[100, 100]"}, {"hidden_activation", "relu"},
          {"algo", "adam"}, {"lr", "0.0029"}, {"batch", "200"}, {"epochs", "50"}}},
        {"cifar-mlp-500-adam",
         {{"model", "mlp"}, {"hidden_units", "[500, 500]"}, {"hidden_activation", "relu"},
          {"algo", "adam"}, {"lr", "0.0002"}, {"batch", "200"}, {"epochs", "50"}}},
        {"cifar-mlp-100-sgd",
         {{"model", "mlp"}, {"hidden_units", "[100, 100]"}, {"hidden_activation", "relu"},
          {"algo", "sgd"}, {"lr", "0.1500"}, {"sgd_decay", "0.9"}, {"batch", "200"},
          {"epochs", "50"}}},
        {"cifar-mlp-500-sgd",
         {{"model", "mlp"}, {"hidden_units", "[500, 500]"}, {"hidden_activation", "relu"},
          {"algo", "sgd"}, {"lr", "0.1428"}, {"sgd_decay", "0.9"}, {"batch", "200"},
          {"epochs", "50"}}},
        {"cifar-mlp-100-am-adam",
         {{"model", "mlp"}, {"hidden_units", "[100, 100]"}, {"hidden_activation", "relu"},
          {"algo", "am-adam"}, {"lr", "0.1974"}, {"code_lr", "0.5"}, {"code_iters", "1"},
          {"weight_iters", "1"}, {"mu0", "0.01"}, {"mu_increment", "1e-5"},
          {"mu_multiplier", "1.1"}, {"mu_max", "1.5"}, {"batch", "200"}, {"epochs", "50"}}},
        {"cifar-mlp-500-am-adam",
         {{"model", "mlp"}, {"hidden_units", "[500, 500]"}, {"hidden_activation", "relu"},
          {"algo", "am-adam"}, {"lr", "0.1011"}, {"code_lr", "0.5"}, {"code_iters", "1"},
          {"weight_iters", "1"}, {"mu0", "0.01"}, {"mu_increment", "1e-5"},
          {"mu_multiplier", "1.1"}, {"mu_max", "1.5"}, {"batch", "200"}, {"epochs", "50"}}},
        {"cifar-mlp-100-am-mem",
         {{"model", "mlp"}, {"hidden_units", "[100, 100]"}, {"hidden_activation", "relu"},
          {"algo", "am-mem"}, {"lr", "0.1746"}, {"code_lr", "0.5"}, {"code_iters", "1"},
          {"weight_iters", "1"}, {"mu0", "0.01"}, {"mu_increment", "1e-5"},
          {"mu_multiplier", "1.1"}, {"mu_max", "1.5"}, {"batch", "200"}, {"epochs", "50"}}},
        {"cifar-mlp-500-am-mem",
         {{"model", "mlp"}, {"hidden_units", "[500, 500]"}, {"hidden_activation", "relu"},
          {"algo", "am-mem"}, {"lr", "0.1016"}, {"code_lr", "0.5"}, {"code_iters", "1"},
          {"weight_iters", "1"}, {"mu0", "0.01"}, {"mu_increment", "1e-5"},
          {"mu_multiplier", "1.1"}, {"mu_max", "1.5"}, {"batch", "200"}, {"epochs", "50"}}},

        // Single 300-unit hidden layer; the stream is enormous, one epoch.
        {"higgs-adam",
         {{"model", "mlp"}, {"hidden_units", "[300]"}, {"hidden_activation", "relu"},
          {"algo", "adam"}, {"lr", "0.001"}, {"batch", "200"}, {"epochs", "1"}}},
        {"higgs-sgd",
         {{"model", "mlp"}, {"hidden_units", "[300]"}, {"hidden_activation", "relu"},
          {"algo", "sgd"}, {"lr", "0.050"}, {"sgd_decay", "0.9"}, {"batch", "200"},
          {"epochs", "1"}}},
        {"higgs-am-adam",
         {{"model", "mlp"}, {"hidden_units", "[300]"}, {"hidden_activation", "relu"},
          {"algo", "am-adam"}, {"lr", "0.001"}, {"code_lr", "0.5"}, {"code_iters", "1"},
          {"weight_iters", "1"}, {"mu0", "0.01"}, {"mu_increment", "1e-5"},
          {"mu_multiplier", "1.1"}, {"mu_max", "1.5"}, {"batch", "200"}, {"epochs", "1"}}},

        // Elman unit on pixel sequences (rnn_pool 1: the full 784-step scan).
        {"rnn-15-adam",
         {{"model", "rnn"}, {"rnn_d", "15"}, {"rnn_pool", "1"}, {"algo", "adam"},
          {"lr", "0.005"}, {"batch", "1024"}, {"epochs", "10"}}},
        {"rnn-15-sgd",
         {{"model", "rnn"}, {"rnn_d", "15"}, {"rnn_pool", "1"}, {"algo", "sgd"},
          {"lr", "0.05"}, {"sgd_decay", "0.9"}, {"batch", "1024"}, {"epochs", "10"}}},
        {"rnn-15-am-adam",
         {{"model", "rnn"}, {"rnn_d", "15"}, {"rnn_pool", "1"}, {"algo", "am-adam"},
          {"lr", "0.005"}, {"code_lr", "0.5"}, {"code_iters", "5"}, {"weight_iters", "5"},
          {"mu0", "0.01"}, {"mu_increment", "0.01"}, {"mu_multiplier", "1.1"}, {"mu_max", "1"},
          {"batch", "1024"}, {"epochs", "10"}}},
        {"rnn-50-adam",
         {{"model", "rnn"}, {"rnn_d", "50"}, {"rnn_pool", "1"}, {"algo", "adam"},
          {"lr", "0.005"}, {"batch", "1024"}, {"epochs", "10"}}},
        {"rnn-50-sgd",
         {{"model", "rnn"}, {"rnn_d", "50"}, {"rnn_pool", "1"}, {"algo", "sgd"},
          {"lr", "0.005"}, {"sgd_decay", "0.9"}, {"batch", "1024"}, {"epochs", "10"}}},
        {"rnn-50-am-adam",
         {{"model", "rnn"}, {"rnn_d", "50"}, {"rnn_pool", "1"}, {"algo", "am-adam"},
          {"lr", "0.005"}, {"code_lr", "0.5"}, {"code_iters", "5"}, {"weight_iters", "5"},
          {"mu0", "0.01"}, {"mu_increment", "0.0001"}, {"mu_multiplier", "1.0"}, {"mu_max", "1"},
          {"batch", "1024"}, {"epochs", "10"}}},

        // Desk-scale battery on the procedural digit corpus: 12000 samples
        // split 5/6, so 10000 train / 2000 held out as a test set.
        {"digits-mlp-am-adam",
         {{"model", "mlp"}, {"dataset", "digits"}, {"n_samples", "12000"},
          {"train_fraction", "0.8333333333333333"}, {"eval_split", "test"},
          {"hidden_units", "[100, 100]"}, {"hidden_activation", "relu"}, {"algo", "am-adam"},
          {"lr", "0.005"}, {"code_lr", "0.5"}, {"code_iters", "1"}, {"weight_iters", "1"},
          {"mu0", "0.01"}, {"mu_increment", "1e-5"}, {"mu_multiplier", "1.1"}, {"mu_max", "1.5"},
          {"batch", "200"}, {"epochs", "10"}, {"seed", "1"}}},
        {"digits-mlp-adam",
         {{"model", "mlp"}, {"dataset", "digits"}, {"n_samples", "12000"},
          {"train_fraction", "0.8333333333333333"}, {"eval_split", "test"},
          {"hidden_units", "[100, 100]"}, {"hidden_activation", "relu"}, {"algo", "adam"},
          {"lr", "0.0210"}, {"batch", "200"}, {"epochs", "10"}, {"seed", "1"}}},
        {"digits-mlp-sgd",
         {{"model", "mlp"}, {"dataset", "digits"}, {"n_samples", "12000"},
          {"train_fraction", "0.8333333333333333"}, {"eval_split", "test"},
          {"hidden_units", "[100, 100]"}, {"hidden_activation", "relu"}, {"algo", "sgd"},
          {"lr", "0.2030"}, {"sgd_decay", "0.9"}, {"batch", "200"}, {"epochs", "10"},
          {"seed", "1"}}},
        {"digits-binary-am-adam",
         {{"model", "mlp"}, {"dataset", "digits"}, {"n_samples", "12000"},
          {"train_fraction", "0.8333333333333333"}, {"eval_split", "test"},
          {"hidden_units", "[100, 100]"}, {"hidden_activations", "[sign, tanh]"},
          {"algo", "am-adam"}, {"lr", "0.01"}, {"code_lr", "0.5"}, {"code_iters", "1"},
          {"weight_iters", "1"}, {"mu0", "0.01"}, {"mu_increment", "1e-5"},
          {"mu_multiplier", "1.0"}, {"mu_max", "1.5"}, {"batch", "200"}, {"epochs", "20"},
          {"seed", "1"}}},
        {"digits-rnn-am-adam",
         {{"model", "rnn"}, {"dataset", "digits"}, {"n_samples", "12000"},
          {"train_fraction", "0.8333333333333333"}, {"eval_split", "test"},
          {"rnn_d", "15"}, {"rnn_pool", "4"}, {"algo", "am-adam"}, {"lr", "0.005"},
          {"code_lr", "0.3"}, {"code_iters", "5"}, {"weight_iters", "1"}, {"mu0", "0.5"},
          {"mu_increment", "0"}, {"mu_multiplier", "1.0"}, {"mu_max", "0.5"}, {"batch", "256"},
          {"epochs", "10"}, {"seed", "1"}}},
        {"digits-rnn-adam",
         {{"model", "rnn"}, {"dataset", "digits"}, {"n_samples", "12000"},
          {"train_fraction", "0.8333333333333333"}, {"eval_split", "test"},
          {"rnn_d", "15"}, {"rnn_pool", "4"}, {"algo", "adam"}, {"lr", "0.005"},
          {"batch", "256"}, {"epochs", "10"}, {"seed", "1"}}},
    };
    return table;
}

}  // namespace detail

inline std::vector<std::string> preset_names() {
    std::vector<std::string> names;
    for (const auto& p : detail::preset_table()) names.push_back(p.name);
    return names;
}

// Preset values fill in; explicit keys in `cfg` win.
inline Config apply_preset(const Config& cfg) {
    if (!cfg.has("preset")) return cfg;
    std::string name = cfg.get_string("preset");
    const detail::Preset* found = nullptr;
    for (const auto& p : detail::preset_table())
        if (name == p.name) {
            found = &p;
            break;
        }
    if (!found) {
        std::string known;
        for (const auto& p : detail::preset_table()) known += std::string("\n  ") + p.name;
        throw ConfigError("unknown preset '" + name + "'; available presets:" + known);
    }
    Config out = cfg;
    for (const auto& [key, value] : found->pairs)
        if (!out.has(key)) out.set(key, value);
    return out;
}

}  // namespace altmin
