#pragma once

#include "cpgpe/blocks.hpp"
#include "cpgpe/checkpoint.hpp"
#include "cpgpe/circuit.hpp"
#include "cpgpe/data.hpp"
#include "cpgpe/encoder.hpp"
#include "cpgpe/errors.hpp"
#include "cpgpe/experiment.hpp"
#include "cpgpe/layers.hpp"
#include "cpgpe/lif.hpp"
#include "cpgpe/metrics.hpp"
#include "cpgpe/models.hpp"
#include "cpgpe/oscillator.hpp"
#include "cpgpe/tensor.hpp"
#include "cpgpe/train.hpp"
