total = 0
for i in range(0):
    total += i
print(total)
