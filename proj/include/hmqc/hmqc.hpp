#pragma once

// Umbrella header for the library (the CLI lives in hmqc/cli.hpp).

#include "hmqc/blackwell.hpp"
#include "hmqc/capacity.hpp"
#include "hmqc/measure.hpp"
#include "hmqc/model.hpp"
