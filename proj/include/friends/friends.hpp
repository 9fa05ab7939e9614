#pragma once

#include "friends/analysis.hpp"
#include "friends/app.hpp"
#include "friends/codec.hpp"
#include "friends/emulator.hpp"
#include "friends/link.hpp"
#include "friends/metrics.hpp"
#include "friends/pipeline.hpp"
#include "friends/plot.hpp"
#include "friends/scenario.hpp"
#include "friends/wire.hpp"
#include "friends/zone.hpp"
