/* 1-D Jacobi stencil on fixed-point values. */
#define N 2000
static int A[N], B[N];

long long main_(int steps) {
    for (int i = 0; i < N; i++) {
        A[i] = (i + 2) * 1024 / N;
        B[i] = (i + 3) * 1024 / N;
    }
    for (int t = 0; t < steps; t++) {
        for (int i = 1; i < N - 1; i++)
            B[i] = (A[i - 1] + A[i] + A[i + 1]) / 3;
        for (int i = 1; i < N - 1; i++)
            A[i] = (B[i - 1] + B[i] + B[i + 1]) / 3;
    }
    long long s = 0;
    for (int i = 0; i < N; i++)
        s += A[i];
    return s;
}
