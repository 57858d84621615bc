#pragma once

#include "logitreg/analytics.hpp"
#include "logitreg/config.hpp"
#include "logitreg/datagen.hpp"
#include "logitreg/errors.hpp"
#include "logitreg/io.hpp"
#include "logitreg/losses.hpp"
#include "logitreg/quadrature.hpp"
#include "logitreg/rng.hpp"
#include "logitreg/svg.hpp"
#include "logitreg/sweeps.hpp"
#include "logitreg/trainer.hpp"
