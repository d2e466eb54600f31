use ctproj::alloc_tracker::TrackingAllocator;

#[global_allocator]
static ALLOC: TrackingAllocator = TrackingAllocator;

fn main() {
    std::process::exit(ctproj::cli::run(std::env::args_os()));
}
