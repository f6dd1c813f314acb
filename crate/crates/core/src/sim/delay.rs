use std::collections::VecDeque;

use log::info;

/// Number of physics ticks matching `delay`, rounded.
pub fn delay_steps(delay: f64, dt: f64) -> usize {
    let exact = delay / dt;
    let steps = exact.round().max(0.0) as usize;
    if (exact - steps as f64).abs() > 1e-9 {
        info!("command delay {delay} s rounded to {steps} ticks of {dt} s");
    }
    steps
}

/// Fixed-latency FIFO clocked at the physics rate.
#[derive(Debug, Clone)]
pub struct DelayLine<T: Clone> {
    buf: VecDeque<T>,
}

impl<T: Clone> DelayLine<T> {
    /// A line of `steps` ticks pre-filled with `initial`.
    pub fn new(steps: usize, initial: T) -> Self {
        Self { buf: std::iter::repeat_n(initial, steps).collect() }
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    /// Push this tick's input and return the one from `len()` ticks ago.
    pub fn push(&mut self, value: T) -> T {
        self.buf.push_back(value);
        self.buf.pop_front().expect("nonempty after push")
    }
}
