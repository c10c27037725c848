#ifndef NNCM_NNCM_HPP
#define NNCM_NNCM_HPP

#include "core_model.hpp"
#include "correction_network.hpp"
#include "dataset.hpp"
#include "model_file.hpp"
#include "run_config.hpp"
#include "training.hpp"
#include "validation.hpp"
#include "veriloga.hpp"

#endif
