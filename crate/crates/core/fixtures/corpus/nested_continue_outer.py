s = 0
for i in range(5):
    if i == 2:
        continue
    for j in range(2):
        s += i * j
print(s)
