X = 1024
N = X / 500
for i in range(10):
    if X % 2 == 0:
        N += 1
    else:
        G += 1
for i in range(0, N):
    X += 100
print(X)
