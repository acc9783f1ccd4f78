#pragma once

#include "fusion_spectra/errors.hpp"
#include "fusion_spectra/synthetic_model.hpp"
#include "fusion_spectra/kernel_core.hpp"
#include "fusion_spectra/bandwidth.hpp"
#include "fusion_spectra/measure.hpp"
#include "fusion_spectra/free_convolution.hpp"
#include "fusion_spectra/rmt_predictor.hpp"
#include "fusion_spectra/clean_reference.hpp"
#include "fusion_spectra/regime.hpp"
#include "fusion_spectra/harness.hpp"
#include "fusion_spectra/config_json.hpp"
#include "fusion_spectra/raw_io.hpp"
#include "fusion_spectra/csv_output.hpp"
