hits = 0
for i in range(4):
    for j in range(4):
        if j > i:
            break
        hits += 1
print(hits)
