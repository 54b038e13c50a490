pairs = 0
for i in range(3):
    for j in range(i):
        pairs += 1
print(pairs)
