/* Integer matrix multiply, C = alpha*A*B + beta*C. */
#define N 32
static int A[N][N], B[N][N], C[N][N];

long long main_(int reps) {
    for (int i = 0; i < N; i++)
        for (int j = 0; j < N; j++) {
            A[i][j] = (i * j + 1) % N;
            B[i][j] = (i * (j + 1)) % N;
            C[i][j] = (i + j) % N;
        }
    for (int r = 0; r < reps; r++)
        for (int i = 0; i < N; i++)
            for (int j = 0; j < N; j++) {
                int acc = 3 * C[i][j];
                for (int k = 0; k < N; k++)
                    acc += 2 * A[i][k] * B[k][j];
                C[i][j] = acc & 0xffff;
            }
    long long s = 0;
    for (int i = 0; i < N; i++)
        for (int j = 0; j < N; j++)
            s = s * 31 + C[i][j];
    return s;
}
