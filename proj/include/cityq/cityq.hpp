#pragma once

#include "cityq/cityq_core.hpp"
#include "cityq/cli.hpp"
#include "cityq/csv.hpp"
#include "cityq/presets.hpp"
