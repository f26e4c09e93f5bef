import threadpoolctl

# trial-level parallelism everywhere; keep BLAS single-threaded
threadpoolctl.threadpool_limits(limits=1)
