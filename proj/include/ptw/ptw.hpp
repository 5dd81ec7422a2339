#pragma once

#include "analytics.hpp"
#include "double_double.hpp"
#include "ensemble.hpp"
#include "io.hpp"
#include "params.hpp"
#include "quadrature.hpp"
#include "rng.hpp"
#include "sampler.hpp"
