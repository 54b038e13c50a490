a = b = 0
for k in range(4):
    if k < 2:
        a += 1
    else:
        b += 1
print(a, b)
